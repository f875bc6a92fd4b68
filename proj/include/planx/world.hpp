#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "planx/rng.hpp"

namespace planx {

enum class Shape { square = 0, circle = 1, triangle = 2 };

struct WorldConfig {
  int cells_h = 8;
  int cells_w = 8;
  int cell_px = 4;
  int fps = 16;
  int sem_fps = 2;
  std::vector<int> bg_choices = {0, 1, 2, 3, 4, 5, 6, 7};  // palette ids

  int frame_h() const { return cells_h * cell_px; }
  int frame_w() const { return cells_w * cell_px; }
  int frames_per_unit() const { return fps / sem_fps; }
};

// 8-color palette shared by objects and backgrounds.
const std::array<std::array<float, 3>, 8>& palette();
const std::vector<std::string>& color_names();
const std::vector<std::string>& shape_names();

// Binary footprint of a shape inside one cell; row-major cell_px^2.
std::vector<std::uint8_t> shape_mask(Shape s, int cell_px);

struct SceneObject {
  int id = 0;
  Shape shape = Shape::square;
  int color = 0;
  int row = 0;
  int col = 0;
};

struct Scene {
  int cells_h = 8;
  int cells_w = 8;
  int bg_color = 0;
  std::vector<SceneObject> objects;
};

enum class ActionType { move = 0, pick = 1, place = 2, swap = 3 };

struct Action {
  ActionType type = ActionType::move;
  int object = 0;
  int object2 = -1;        // swap partner
  int dr = 0, dc = 0;      // move direction (unit step)
  int n_cells = 0;         // move distance
  int target_row = -1;     // place target
  int target_col = -1;
  int start_frame = 0;     // frame times at WorldConfig::fps
  int end_frame = 0;
};

struct ActionScript {
  std::vector<Action> actions;
  bool truncated = false;  // fewer feasible actions than requested
};

struct PromptBundle {
  std::string t_img;
  std::string t_motion;
  std::string t_sys;
};

struct VideoClip {
  int frames = 0;
  int h = 0;
  int w = 0;
  int fps = 0;
  std::vector<float> data;  // [frames, h, w, 3] in [0,1]

  float* frame(int f) { return data.data() + static_cast<std::size_t>(f) * h * w * 3; }
  const float* frame(int f) const {
    return data.data() + static_cast<std::size_t>(f) * h * w * 3;
  }
};

// Continuous object state at a point in time; drawn position is
// (row - elev, col).
struct ObjState {
  int id = 0;
  Shape shape = Shape::square;
  int color = 0;
  double row = 0, col = 0;
  double elev = 0;
  bool in_action = false;
};

struct Detection {
  int shape = -1;  // Shape value, or -1 for "unknown"
  int color = 0;
  int row = 0;
  int col = 0;
};

Scene sample_scene(const WorldConfig& cfg, std::uint64_t seed, int n_objects);

// k temporally ordered feasible actions inside `seconds` of wall time.
// Truncates (with the flag set) when no feasible action remains.
ActionScript script_actions(const WorldConfig& cfg, const Scene& scene, int k_actions,
                            std::uint64_t seed, int seconds);

// Re-derives the deterministic schedule for an ordered action list whose
// times are not yet assigned.
void schedule_script(const WorldConfig& cfg, const Scene& scene, ActionScript& script,
                     int seconds);

std::vector<ObjState> world_state_at(const WorldConfig& cfg, const Scene& scene,
                                     const ActionScript& script, double t_seconds);

VideoClip render_clip(const WorldConfig& cfg, const Scene& scene, const ActionScript& script,
                      int fps, int seconds);

PromptBundle caption(const WorldConfig& cfg, const Scene& scene, const ActionScript& script,
                     int seconds);

struct ParsedCaption {
  Scene scene;
  ActionScript script;
  int seconds = 0;
  int keyframes = 0;
};
ParsedCaption parse_caption(const WorldConfig& cfg, const PromptBundle& bundle);

std::vector<Detection> detect_objects(const WorldConfig& cfg, const float* frame, int h, int w);
std::vector<Detection> detect_objects(const WorldConfig& cfg, const VideoClip& clip, int f);

// Closed caption vocabulary (words only, no special tokens).
std::vector<std::string> grammar_words();

// Deterministic duration of one action in keyframe units given the object
// layout when it starts.
int action_units(const Action& a, int from_row, int from_col);

}  // namespace planx
