#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace planx {

// Axial rotary table over (t, h, w). Per-pair angle for axis a is
// coord * base^(-2i/d_a). Semantic-grid coordinates are multiplied by
// per-axis scale factors before rotation so both grids span the same
// coordinate range.
struct RopeTable {
  int head_dim = 0;
  double base = 10000.0;
  int n_axes = 1;
  std::array<int, 3> axis_dims{0, 0, 0};
  std::array<int, 3> video_grid{0, 0, 0};
  std::array<int, 3> sem_grid{0, 0, 0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  std::vector<double> freq;        // head_dim/2 pair frequencies
  std::vector<int> axis_of_pair;   // axis index per pair

  static RopeTable one_d(int head_dim, double base, int max_pos);
  static RopeTable axial3d(int head_dim, double base, std::array<int, 3> video_grid,
                           std::array<int, 3> sem_grid);

  // Largest even split to t, remainder divided evenly between h and w.
  static std::array<int, 3> split_dims(int head_dim);

  int pairs() const { return head_dim / 2; }

  // Angles for one position; semantic positions are scaled first and
  // validated against the semantic grid, video positions against the
  // video grid.
  void angles(const std::array<double, 3>& pos, bool semantic, double* out) const;

  void check_position(const std::array<double, 3>& pos, bool semantic) const;
};

}  // namespace planx
