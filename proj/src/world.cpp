#include "planx/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace planx {

const std::array<std::array<float, 3>, 8>& palette() {
  static const std::array<std::array<float, 3>, 8> p = {{{1.0f, 0.0f, 0.0f},
                                                         {0.0f, 1.0f, 0.0f},
                                                         {0.0f, 0.0f, 1.0f},
                                                         {1.0f, 1.0f, 0.0f},
                                                         {0.0f, 1.0f, 1.0f},
                                                         {1.0f, 0.0f, 1.0f},
                                                         {1.0f, 0.5f, 0.0f},
                                                         {0.5f, 0.0f, 0.5f}}};
  return p;
}

const std::vector<std::string>& color_names() {
  static const std::vector<std::string> n = {"red",  "green",   "blue",   "yellow",
                                             "cyan", "magenta", "orange", "purple"};
  return n;
}

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> n = {"square", "circle", "triangle"};
  return n;
}

std::vector<std::uint8_t> shape_mask(Shape s, int cell_px) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(cell_px) * cell_px, 0);
  double c = cell_px / 2.0;
  double r = 0.45 * cell_px;
  for (int y = 0; y < cell_px; ++y) {
    for (int x = 0; x < cell_px; ++x) {
      bool on = false;
      switch (s) {
        case Shape::square:
          on = true;
          break;
        case Shape::circle: {
          double dy = y + 0.5 - c, dx = x + 0.5 - c;
          on = dy * dy + dx * dx <= r * r;
          break;
        }
        case Shape::triangle:
          on = x <= y;
          break;
      }
      m[static_cast<std::size_t>(y) * cell_px + x] = on ? 1 : 0;
    }
  }
  return m;
}

Scene sample_scene(const WorldConfig& cfg, std::uint64_t seed, int n_objects) {
  const int capacity = cfg.cells_h * cfg.cells_w;
  const int max_colors = static_cast<int>(palette().size()) - 1;  // background takes one
  if (n_objects < 0 || n_objects > max_colors || n_objects > capacity) {
    throw std::invalid_argument("sample_scene: infeasible object count " +
                                std::to_string(n_objects));
  }
  Rng rng(seed);
  Scene scene;
  scene.cells_h = cfg.cells_h;
  scene.cells_w = cfg.cells_w;
  if (cfg.bg_choices.empty()) throw std::invalid_argument("sample_scene: no background choices");
  scene.bg_color = cfg.bg_choices[rng.randint(0, static_cast<int>(cfg.bg_choices.size()) - 1)];

  std::vector<int> colors;
  for (int c = 0; c < static_cast<int>(palette().size()); ++c) {
    if (c != scene.bg_color) colors.push_back(c);
  }
  rng.shuffle(colors);

  std::vector<int> cells(capacity);
  for (int i = 0; i < capacity; ++i) cells[i] = i;
  rng.shuffle(cells);

  for (int i = 0; i < n_objects; ++i) {
    SceneObject o;
    o.id = i;
    o.color = colors[i];
    o.shape = static_cast<Shape>(rng.randint(0, 2));
    o.row = cells[i] / cfg.cells_w;
    o.col = cells[i] % cfg.cells_w;
    scene.objects.push_back(o);
  }
  return scene;
}

namespace {

struct SimState {
  std::vector<int> row, col;
  std::vector<int> elev;  // 0 grounded, 1 picked up

  explicit SimState(const Scene& s) {
    for (const auto& o : s.objects) {
      row.push_back(o.row);
      col.push_back(o.col);
      elev.push_back(0);
    }
  }

  // Drawn cell of object i (elevation shifts one row up).
  std::pair<int, int> drawn(int i) const { return {row[i] - elev[i], col[i]}; }

  bool cell_free(int r, int c, int skip_a, int skip_b = -1) const {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (static_cast<int>(i) == skip_a || static_cast<int>(i) == skip_b) continue;
      auto [dr, dc] = drawn(static_cast<int>(i));
      if (dr == r && dc == c) return false;
      if (row[i] == r && col[i] == c) return false;  // logical cell reserved too
    }
    return true;
  }

  void apply(const Action& a) {
    switch (a.type) {
      case ActionType::move:
        row[a.object] += a.dr * a.n_cells;
        col[a.object] += a.dc * a.n_cells;
        break;
      case ActionType::pick:
        elev[a.object] = 1;
        break;
      case ActionType::place:
        row[a.object] = a.target_row;
        col[a.object] = a.target_col;
        elev[a.object] = 0;
        break;
      case ActionType::swap: {
        std::swap(row[a.object], row[a.object2]);
        std::swap(col[a.object], col[a.object2]);
        break;
      }
    }
  }
};

// Cells an action sweeps through in drawn space, used for feasibility.
std::vector<std::pair<int, int>> sweep_cells(const SimState& st, const Action& a) {
  std::vector<std::pair<int, int>> cells;
  int r = st.row[a.object], c = st.col[a.object];
  switch (a.type) {
    case ActionType::move:
      for (int i = 1; i <= a.n_cells; ++i) cells.push_back({r + a.dr * i, c + a.dc * i});
      break;
    case ActionType::pick:
      cells.push_back({r - 1, c});
      break;
    case ActionType::place: {
      int tr = a.target_row, tc = a.target_col;
      int step = tc >= c ? 1 : -1;
      for (int x = c; x != tc; x += step) cells.push_back({r - 1, x});
      cells.push_back({r - 1, tc});
      int rstep = tr >= r ? 1 : -1;
      for (int y = r; y != tr; y += rstep) cells.push_back({y - 1, tc});
      cells.push_back({tr - 1, tc});
      cells.push_back({tr, tc});
      break;
    }
    case ActionType::swap: {
      int r2 = st.row[a.object2], c2 = st.col[a.object2];
      int lo = std::min(c, c2), hi = std::max(c, c2);
      for (int x = lo; x <= hi; ++x) cells.push_back({r - 1, x});  // elevated lane of a
      for (int x = lo; x <= hi; ++x) cells.push_back({r2, x});    // grounded path of b
      break;
    }
  }
  return cells;
}

bool action_feasible(const WorldConfig& cfg, const SimState& st, const Action& a) {
  int n = static_cast<int>(st.row.size());
  if (a.object < 0 || a.object >= n) return false;
  auto in_grid = [&](int r, int c) { return r >= 0 && r < cfg.cells_h && c >= 0 && c < cfg.cells_w; };
  switch (a.type) {
    case ActionType::move: {
      if (st.elev[a.object]) return false;
      if (a.n_cells < 1) return false;
      int er = st.row[a.object] + a.dr * a.n_cells;
      int ec = st.col[a.object] + a.dc * a.n_cells;
      if (!in_grid(er, ec)) return false;
      break;
    }
    case ActionType::pick:
      if (st.elev[a.object]) return false;
      if (st.row[a.object] < 1) return false;
      break;
    case ActionType::place: {
      if (!st.elev[a.object]) return false;
      if (a.target_row < 1 || a.target_row >= cfg.cells_h) return false;
      if (a.target_col < 0 || a.target_col >= cfg.cells_w) return false;
      break;
    }
    case ActionType::swap: {
      if (a.object2 < 0 || a.object2 >= n || a.object2 == a.object) return false;
      if (st.elev[a.object] || st.elev[a.object2]) return false;
      if (st.row[a.object] != st.row[a.object2]) return false;  // same-row choreography
      if (st.row[a.object] < 1) return false;
      break;
    }
  }
  for (auto [r, c] : sweep_cells(st, a)) {
    if (!in_grid(r, c)) return false;
    int skip2 = a.type == ActionType::swap ? a.object2 : -1;
    if (!st.cell_free(r, c, a.object, skip2)) return false;
  }
  return true;
}

}  // namespace

int action_units(const Action& a, int from_row, int from_col) {
  switch (a.type) {
    case ActionType::move:
      return a.n_cells;
    case ActionType::pick:
      return 1;
    case ActionType::place:
      return std::abs(a.target_row - from_row) + std::abs(a.target_col - from_col) + 1;
    case ActionType::swap:
      return std::abs(a.target_col - from_col) + 2;  // target_col caches partner column
  }
  return 1;
}

void schedule_script(const WorldConfig& cfg, const Scene& scene, ActionScript& script,
                     int seconds) {
  SimState st(scene);
  const int fpu = cfg.frames_per_unit();
  const int total_units = seconds * cfg.sem_fps;
  int cursor = 1;  // one still unit before the first action
  for (auto& a : script.actions) {
    if (!action_feasible(cfg, st, a)) {
      throw std::invalid_argument("schedule_script: infeasible action in script");
    }
    if (a.type == ActionType::swap) a.target_col = st.col[a.object2];
    int units = action_units(a, st.row[a.object], st.col[a.object]);
    a.start_frame = cursor * fpu;
    a.end_frame = (cursor + units) * fpu;
    cursor += units;
    if (cursor > total_units - 1) {
      throw std::invalid_argument("schedule_script: script does not fit in " +
                                  std::to_string(seconds) + "s");
    }
    st.apply(a);
  }
}

ActionScript script_actions(const WorldConfig& cfg, const Scene& scene, int k_actions,
                            std::uint64_t seed, int seconds) {
  if (k_actions < 0) throw std::invalid_argument("script_actions: negative action count");
  Rng rng(seed);
  ActionScript script;
  SimState st(scene);
  const int total_units = seconds * cfg.sem_fps;
  int cursor = 1;

  for (int k = 0; k < k_actions; ++k) {
    int budget = total_units - 1 - cursor;
    if (budget < 1) {
      script.truncated = true;
      break;
    }
    // Enumerate feasible candidates that fit in the remaining budget.
    std::vector<Action> candidates;
    int n = static_cast<int>(scene.objects.size());
    for (int obj = 0; obj < n; ++obj) {
      if (!st.elev[obj]) {
        const int dirs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
        for (auto& d : dirs) {
          for (int dist = 1; dist <= 3 && dist <= budget; ++dist) {
            Action a;
            a.type = ActionType::move;
            a.object = obj;
            a.dr = d[0];
            a.dc = d[1];
            a.n_cells = dist;
            if (action_feasible(cfg, st, a)) candidates.push_back(a);
          }
        }
        if (budget >= 1) {
          Action a;
          a.type = ActionType::pick;
          a.object = obj;
          if (action_feasible(cfg, st, a)) candidates.push_back(a);
        }
        for (int obj2 = 0; obj2 < n; ++obj2) {
          if (obj2 == obj) continue;
          Action a;
          a.type = ActionType::swap;
          a.object = obj;
          a.object2 = obj2;
          a.target_col = st.col[obj2];
          if (action_feasible(cfg, st, a) &&
              action_units(a, st.row[obj], st.col[obj]) <= budget) {
            candidates.push_back(a);
          }
        }
      } else {
        for (int tr = 1; tr < cfg.cells_h; ++tr) {
          for (int tc = 0; tc < cfg.cells_w; ++tc) {
            int dist = std::abs(tr - st.row[obj]) + std::abs(tc - st.col[obj]);
            if (dist < 1 || dist > 3 || dist + 1 > budget) continue;
            Action a;
            a.type = ActionType::place;
            a.object = obj;
            a.target_row = tr;
            a.target_col = tc;
            if (action_feasible(cfg, st, a)) candidates.push_back(a);
          }
        }
      }
    }
    if (candidates.empty()) {
      script.truncated = true;
      break;
    }
    Action a = candidates[rng.randint(0, static_cast<int>(candidates.size()) - 1)];
    int units = action_units(a, st.row[a.object], st.col[a.object]);
    const int fpu = cfg.frames_per_unit();
    a.start_frame = cursor * fpu;
    a.end_frame = (cursor + units) * fpu;
    cursor += units;
    st.apply(a);
    script.actions.push_back(a);
  }
  return script;
}

std::vector<ObjState> world_state_at(const WorldConfig& cfg, const Scene& scene,
                                     const ActionScript& script, double t_seconds) {
  std::vector<ObjState> out;
  for (const auto& o : scene.objects) {
    ObjState s;
    s.id = o.id;
    s.shape = o.shape;
    s.color = o.color;
    s.row = o.row;
    s.col = o.col;
    out.push_back(s);
  }
  SimState st(scene);
  const double fps = cfg.fps;
  for (const auto& a : script.actions) {
    double t0 = a.start_frame / fps;
    double t1 = a.end_frame / fps;
    int obj = a.object;
    int r = st.row[obj], c = st.col[obj];
    if (t_seconds >= t1) {
      st.apply(a);
      auto set = [&](int i) {
        out[i].row = st.row[i];
        out[i].col = st.col[i];
        out[i].elev = st.elev[i];
      };
      set(obj);
      if (a.type == ActionType::swap) set(a.object2);
      continue;
    }
    if (t_seconds <= t0) break;
    double ph = (t_seconds - t0) / (t1 - t0);  // (0,1) inside the action
    out[obj].in_action = true;
    switch (a.type) {
      case ActionType::move:
        out[obj].row = r + a.dr * a.n_cells * ph;
        out[obj].col = c + a.dc * a.n_cells * ph;
        break;
      case ActionType::pick:
        out[obj].elev = ph;
        break;
      case ActionType::place: {
        int dist_c = std::abs(a.target_col - c);
        int dist_r = std::abs(a.target_row - r);
        int units = dist_c + dist_r + 1;
        double u = ph * units;  // progress in units
        out[obj].elev = 1.0;
        if (u <= dist_c) {
          out[obj].col = c + (a.target_col >= c ? u : -u);
        } else if (u <= dist_c + dist_r) {
          out[obj].col = a.target_col;
          double ur = u - dist_c;
          out[obj].row = r + (a.target_row >= r ? ur : -ur);
        } else {
          out[obj].col = a.target_col;
          out[obj].row = a.target_row;
          out[obj].elev = 1.0 - (u - dist_c - dist_r);
        }
        break;
      }
      case ActionType::swap: {
        int obj2 = a.object2;
        int r2 = st.row[obj2], c2 = st.col[obj2];
        int dist = std::abs(c2 - c);
        int units = dist + 2;
        double u = ph * units;
        out[obj2].in_action = true;
        if (u <= 1.0) {
          out[obj].elev = u;  // rise
        } else if (u <= 1.0 + dist) {
          double f = (u - 1.0) / dist;
          out[obj].elev = 1.0;
          out[obj].col = c + (c2 - c) * f;
          out[obj2].col = c2 + (c - c2) * f;
        } else {
          out[obj].elev = 1.0 - (u - 1.0 - dist);
          out[obj].col = c2;
          out[obj2].col = c;
        }
        break;
      }
    }
    break;  // actions are sequential; later ones have not started
  }
  return out;
}

VideoClip render_clip(const WorldConfig& cfg, const Scene& scene, const ActionScript& script,
                      int fps, int seconds) {
  VideoClip clip;
  clip.fps = fps;
  clip.frames = fps * seconds;
  clip.h = cfg.frame_h();
  clip.w = cfg.frame_w();
  clip.data.assign(static_cast<std::size_t>(clip.frames) * clip.h * clip.w * 3, 0.0f);

  const auto& pal = palette();
  std::vector<std::vector<std::uint8_t>> masks;
  for (int s = 0; s < 3; ++s) masks.push_back(shape_mask(static_cast<Shape>(s), cfg.cell_px));

  for (int f = 0; f < clip.frames; ++f) {
    float* img = clip.frame(f);
    const auto& bg = pal[scene.bg_color];
    for (int i = 0; i < clip.h * clip.w; ++i) {
      img[3 * i] = bg[0];
      img[3 * i + 1] = bg[1];
      img[3 * i + 2] = bg[2];
    }
    auto states = world_state_at(cfg, scene, script, f / static_cast<double>(fps));
    for (const auto& st : states) {
      int y0 = static_cast<int>(std::lround((st.row - st.elev) * cfg.cell_px));
      int x0 = static_cast<int>(std::lround(st.col * cfg.cell_px));
      const auto& mask = masks[static_cast<int>(st.shape)];
      const auto& col = pal[st.color];
      for (int y = 0; y < cfg.cell_px; ++y) {
        for (int x = 0; x < cfg.cell_px; ++x) {
          if (!mask[static_cast<std::size_t>(y) * cfg.cell_px + x]) continue;
          int py = y0 + y, px = x0 + x;
          if (py < 0 || py >= clip.h || px < 0 || px >= clip.w) continue;
          float* p = img + (static_cast<std::size_t>(py) * clip.w + px) * 3;
          p[0] = col[0];
          p[1] = col[1];
          p[2] = col[2];
        }
      }
    }
  }
  return clip;
}

namespace {

std::string object_phrase(const SceneObject& o) {
  return "the " + color_names()[o.color] + " " + shape_names()[static_cast<int>(o.shape)];
}

const char* dir_word(int dr, int dc) {
  if (dr == -1) return "up";
  if (dr == 1) return "down";
  if (dc == -1) return "left";
  return "right";
}

}  // namespace

PromptBundle caption(const WorldConfig& cfg, const Scene& scene, const ActionScript& script,
                     int seconds) {
  PromptBundle b;
  std::ostringstream img;
  img << "the background is " << color_names()[scene.bg_color] << " .";
  for (const auto& o : scene.objects) {
    img << " a " << color_names()[o.color] << " " << shape_names()[static_cast<int>(o.shape)]
        << " is at row " << o.row << " column " << o.col << " .";
  }
  b.t_img = img.str();

  if (script.actions.empty()) {
    b.t_motion = "the scene remains still .";
  } else {
    std::ostringstream mo;
    bool first = true;
    for (const auto& a : script.actions) {
      if (!first) mo << " ";
      first = false;
      const auto& o = scene.objects[a.object];
      switch (a.type) {
        case ActionType::move:
          mo << object_phrase(o) << " moves " << dir_word(a.dr, a.dc) << " by " << a.n_cells
             << (a.n_cells == 1 ? " cell ." : " cells .");
          break;
        case ActionType::pick:
          mo << object_phrase(o) << " is picked up .";
          break;
        case ActionType::place:
          mo << object_phrase(o) << " is placed at row " << a.target_row << " column "
             << a.target_col << " .";
          break;
        case ActionType::swap:
          mo << object_phrase(o) << " and " << object_phrase(scene.objects[a.object2])
             << " swap places .";
          break;
      }
    }
    b.t_motion = mo.str();
  }

  int keyframes = 1 + seconds * cfg.sem_fps;
  std::ostringstream sys;
  sys << "generate " << keyframes << " keyframes of a " << seconds << " second video .";
  b.t_sys = sys.str();
  return b;
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

struct WordCursor {
  const std::vector<std::string>& words;
  std::size_t pos = 0;

  const std::string& next() {
    if (pos >= words.size()) throw std::invalid_argument("parse_caption: unexpected end of text");
    return words[pos++];
  }
  void expect(const std::string& w) {
    const std::string& got = next();
    if (got != w)
      throw std::invalid_argument("parse_caption: expected '" + w + "', got '" + got + "'");
  }
  bool done() const { return pos >= words.size(); }
  const std::string& peek() const {
    if (pos >= words.size()) throw std::invalid_argument("parse_caption: unexpected end of text");
    return words[pos];
  }
};

int parse_color(const std::string& w) {
  const auto& names = color_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == w) return static_cast<int>(i);
  }
  throw std::invalid_argument("parse_caption: unknown color '" + w + "'");
}

Shape parse_shape(const std::string& w) {
  const auto& names = shape_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == w) return static_cast<Shape>(i);
  }
  throw std::invalid_argument("parse_caption: unknown shape '" + w + "'");
}

int parse_int(const std::string& w) {
  for (char c : w) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw std::invalid_argument("parse_caption: expected number, got '" + w + "'");
  }
  return std::stoi(w);
}

}  // namespace

ParsedCaption parse_caption(const WorldConfig& cfg, const PromptBundle& bundle) {
  ParsedCaption out;
  out.scene.cells_h = cfg.cells_h;
  out.scene.cells_w = cfg.cells_w;

  // T_img: "the background is <color> . [a <color> <shape> is at row R column C .]*"
  {
    auto words = split_words(bundle.t_img);
    WordCursor c{words};
    c.expect("the");
    c.expect("background");
    c.expect("is");
    out.scene.bg_color = parse_color(c.next());
    c.expect(".");
    int id = 0;
    while (!c.done()) {
      c.expect("a");
      SceneObject o;
      o.id = id++;
      o.color = parse_color(c.next());
      o.shape = parse_shape(c.next());
      c.expect("is");
      c.expect("at");
      c.expect("row");
      o.row = parse_int(c.next());
      c.expect("column");
      o.col = parse_int(c.next());
      c.expect(".");
      out.scene.objects.push_back(o);
    }
  }

  auto find_object = [&](int color) -> int {
    for (const auto& o : out.scene.objects) {
      if (o.color == color) return o.id;
    }
    throw std::invalid_argument("parse_caption: motion references unknown object");
  };

  // T_sys: "generate <T> keyframes of a <S> second video ."
  {
    auto words = split_words(bundle.t_sys);
    WordCursor c{words};
    c.expect("generate");
    out.keyframes = parse_int(c.next());
    c.expect("keyframes");
    c.expect("of");
    c.expect("a");
    out.seconds = parse_int(c.next());
    c.expect("second");
    c.expect("video");
    c.expect(".");
  }

  // T_motion
  {
    auto words = split_words(bundle.t_motion);
    WordCursor c{words};
    if (!words.empty() && words[0] == "the" && words.size() >= 5 && words[1] == "scene") {
      c.expect("the");
      c.expect("scene");
      c.expect("remains");
      c.expect("still");
      c.expect(".");
    } else {
      while (!c.done()) {
        c.expect("the");
        int color = parse_color(c.next());
        parse_shape(c.next());  // shape is redundant given unique colors
        Action a;
        a.object = find_object(color);
        const std::string& verb = c.next();
        if (verb == "moves") {
          a.type = ActionType::move;
          const std::string& dir = c.next();
          if (dir == "up") a.dr = -1;
          else if (dir == "down") a.dr = 1;
          else if (dir == "left") a.dc = -1;
          else if (dir == "right") a.dc = 1;
          else throw std::invalid_argument("parse_caption: unknown direction '" + dir + "'");
          c.expect("by");
          a.n_cells = parse_int(c.next());
          const std::string& unit = c.next();
          if (unit != "cell" && unit != "cells")
            throw std::invalid_argument("parse_caption: expected cell(s)");
          c.expect(".");
        } else if (verb == "is") {
          const std::string& what = c.next();
          if (what == "picked") {
            a.type = ActionType::pick;
            c.expect("up");
            c.expect(".");
          } else if (what == "placed") {
            a.type = ActionType::place;
            c.expect("at");
            c.expect("row");
            a.target_row = parse_int(c.next());
            c.expect("column");
            a.target_col = parse_int(c.next());
            c.expect(".");
          } else {
            throw std::invalid_argument("parse_caption: unknown verb phrase");
          }
        } else if (verb == "and") {
          a.type = ActionType::swap;
          c.expect("the");
          int color2 = parse_color(c.next());
          parse_shape(c.next());
          a.object2 = find_object(color2);
          c.expect("swap");
          c.expect("places");
          c.expect(".");
        } else {
          throw std::invalid_argument("parse_caption: unknown verb '" + verb + "'");
        }
        out.script.actions.push_back(a);
      }
    }
  }

  schedule_script(cfg, out.scene, out.script, out.seconds);
  return out;
}

std::vector<Detection> detect_objects(const WorldConfig& cfg, const float* frame, int h, int w) {
  const auto& pal = palette();
  const double tol = 0.2;
  const int np = static_cast<int>(pal.size());

  // Per-pixel nearest palette color within tolerance; -1 for unclassified.
  std::vector<int> cls(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> color_count(np, 0);
  for (int i = 0; i < h * w; ++i) {
    const float* p = frame + static_cast<std::size_t>(i) * 3;
    double best = 1e9;
    int best_c = -1;
    for (int c = 0; c < np; ++c) {
      double d2 = 0;
      for (int ch = 0; ch < 3; ++ch) {
        double d = p[ch] - pal[c][ch];
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        best_c = c;
      }
    }
    if (best <= tol * tol) {
      cls[i] = best_c;
      color_count[best_c]++;
    }
  }
  int bg = static_cast<int>(std::max_element(color_count.begin(), color_count.end()) -
                            color_count.begin());

  const int cp = cfg.cell_px;
  const int ch_cells = h / cp, cw_cells = w / cp;
  const int fill_threshold = std::max(3, (cp * cp) * 2 / 5);

  std::vector<std::vector<std::uint8_t>> masks;
  for (int s = 0; s < 3; ++s) masks.push_back(shape_mask(static_cast<Shape>(s), cp));

  std::vector<Detection> out;
  for (int r = 0; r < ch_cells; ++r) {
    for (int c = 0; c < cw_cells; ++c) {
      std::vector<int> count(np, 0);
      for (int y = 0; y < cp; ++y) {
        for (int x = 0; x < cp; ++x) {
          int idx = (r * cp + y) * w + c * cp + x;
          if (cls[idx] >= 0 && cls[idx] != bg) count[cls[idx]]++;
        }
      }
      int top = -1, second = -1;
      for (int col = 0; col < np; ++col) {
        if (top < 0 || count[col] > count[top]) {
          second = top;
          top = col;
        } else if (second < 0 || count[col] > count[second]) {
          second = col;
        }
      }
      if (top < 0 || count[top] < fill_threshold) continue;
      Detection d;
      d.row = r;
      d.col = c;
      d.color = top;
      if (second >= 0 && count[second] >= fill_threshold) {
        d.shape = -1;  // two plausible colors in one cell
        out.push_back(d);
        continue;
      }
      // Mask template matching on the top color's footprint.
      int best_shape = 0, best_agree = -1;
      for (int s = 0; s < 3; ++s) {
        int agree = 0;
        for (int y = 0; y < cp; ++y) {
          for (int x = 0; x < cp; ++x) {
            int idx = (r * cp + y) * w + c * cp + x;
            bool on = cls[idx] == top;
            bool m = masks[s][static_cast<std::size_t>(y) * cp + x] != 0;
            if (on == m) agree++;
          }
        }
        if (agree > best_agree) {
          best_agree = agree;
          best_shape = s;
        }
      }
      d.shape = best_shape;
      out.push_back(d);
    }
  }
  return out;
}

std::vector<Detection> detect_objects(const WorldConfig& cfg, const VideoClip& clip, int f) {
  return detect_objects(cfg, clip.frame(f), clip.h, clip.w);
}

std::vector<std::string> grammar_words() {
  std::vector<std::string> words = {
      "the",  "background", "is",   "a",      "at",     "row",    "column", "scene",
      "remains", "still",   "moves", "up",    "down",   "left",   "right",  "by",
      "cell", "cells",      "picked", "placed", "and",  "swap",   "places", "generate",
      "keyframes", "of",    "second", "video", ".",     ":",      "you",    "are",
      "helpful", "assistant", "scene", "description", "instruction", "low",  "quality",
      "unnatural", "motion"};
  for (const auto& c : color_names()) words.push_back(c);
  for (const auto& s : shape_names()) words.push_back(s);
  for (int i = 0; i <= 16; ++i) words.push_back(std::to_string(i));
  // dedupe, preserving first occurrence
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& w : words) {
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

}  // namespace planx
