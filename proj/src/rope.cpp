#include "planx/rope.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace planx {

namespace {

int round_even(double x) { return 2 * static_cast<int>(std::lround(x / 2.0)); }

void fill_freqs(RopeTable& t) {
  t.freq.clear();
  t.axis_of_pair.clear();
  for (int a = 0; a < t.n_axes; ++a) {
    int da = t.axis_dims[a];
    for (int i = 0; i < da / 2; ++i) {
      t.freq.push_back(std::pow(t.base, -2.0 * i / da));
      t.axis_of_pair.push_back(a);
    }
  }
  if (static_cast<int>(t.freq.size()) != t.head_dim / 2) {
    throw std::invalid_argument("rope: axis dims do not sum to head_dim");
  }
}

}  // namespace

std::array<int, 3> RopeTable::split_dims(int head_dim) {
  int dt = round_even(head_dim / 2.0);
  int dh = round_even(head_dim / 4.0);
  int dw = head_dim - dt - dh;
  return {dt, dh, dw};
}

RopeTable RopeTable::one_d(int head_dim, double base, int max_pos) {
  if (head_dim % 2 != 0) throw std::invalid_argument("rope: head_dim must be even");
  RopeTable t;
  t.head_dim = head_dim;
  t.base = base;
  t.n_axes = 1;
  t.axis_dims = {head_dim, 0, 0};
  t.video_grid = {max_pos, 1, 1};
  t.sem_grid = {max_pos, 1, 1};
  t.scale = {1.0, 1.0, 1.0};
  fill_freqs(t);
  return t;
}

RopeTable RopeTable::axial3d(int head_dim, double base, std::array<int, 3> video_grid,
                             std::array<int, 3> sem_grid) {
  if (head_dim % 2 != 0) throw std::invalid_argument("rope: head_dim must be even");
  RopeTable t;
  t.head_dim = head_dim;
  t.base = base;
  t.n_axes = 3;
  t.axis_dims = split_dims(head_dim);
  for (int d : t.axis_dims) {
    if (d % 2 != 0 || d < 0) throw std::invalid_argument("rope: axis dims must be even");
  }
  t.video_grid = video_grid;
  t.sem_grid = sem_grid;
  for (int a = 0; a < 3; ++a) {
    if (video_grid[a] < 1 || sem_grid[a] < 1) {
      throw std::invalid_argument("rope: grid sizes must be positive");
    }
    t.scale[a] = sem_grid[a] > 1
                     ? static_cast<double>(video_grid[a] - 1) / (sem_grid[a] - 1)
                     : 1.0;
    if (!std::isfinite(t.scale[a]) || t.scale[a] <= 0.0) {
      throw std::invalid_argument("rope: scale factor must be finite and positive");
    }
  }
  fill_freqs(t);
  return t;
}

void RopeTable::check_position(const std::array<double, 3>& pos, bool semantic) const {
  const auto& grid = semantic ? sem_grid : video_grid;
  for (int a = 0; a < n_axes; ++a) {
    if (pos[a] < 0.0 || pos[a] > grid[a] - 1 + 1e-9) {
      throw std::invalid_argument("rope: coordinate " + std::to_string(pos[a]) +
                                  " outside grid axis " + std::to_string(a));
    }
  }
}

void RopeTable::angles(const std::array<double, 3>& pos, bool semantic, double* out) const {
  check_position(pos, semantic);
  std::array<double, 3> p = pos;
  if (semantic && n_axes == 3) {
    for (int a = 0; a < 3; ++a) p[a] *= scale[a];
  }
  for (std::size_t i = 0; i < freq.size(); ++i) {
    out[i] = p[axis_of_pair[i]] * freq[i];
  }
}

}  // namespace planx
