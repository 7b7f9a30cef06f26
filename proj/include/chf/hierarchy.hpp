#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chf/deconv.hpp"
#include "chf/recon_net.hpp"
#include "chf/sds_control.hpp"

namespace chf {

// Level l > 0 receives the gated bottom-up error of level l-1 through
// U: x_l = U_eff s_{l-1}, U_eff = diag(1 + V h_l) U when V is set. Its
// controller drives the hidden layer below: experienced momentum is
// U_eff h'_{l-1}, desired momentum is T Q_l h_l (or T speed_field(h_l)).
// The top level, having nothing above it, gets B_ctrl v(h) with the
// decay field v(h) = -kappa h. With top_twist the top mismatch itself,
// mapped by `twist`, is what enters the hidden layer below.
struct LevelSpec {
  ReconNet net;
  std::optional<SdsController> controller;  // absent at the bottom
  Mat U;   // x_dim(l) x h_dim(l-1)
  Mat C;   // x_dim(l) x h_dim(l), optional; C h'_l = U h'_{l-1}
  Mat V;   // x_dim(l) x h_dim(l), optional modulation
  Mat T;   // x_dim(l) x x_dim(l), desired-momentum map, default I
  double kappa = 1.0;    // decay of the top level
  VecField speed_field;  // replaces T Q h as desired momentum when set
  Mat twist;             // top level only: h_dim(L-2) x x_dim(L-1), default I
  bool control_enabled = true;
};

struct HierarchyLevel {
  ReconNet net;
  std::optional<SdsController> controller;
  Mat coupling_U, coupling_C, modulation_V, desired_T, twist;
  double kappa = 1.0;
  VecField speed_field;
  bool control_enabled = true;
  Vec h_dot;  // finite difference from the last sweep
};

struct WiringEdge {
  int from_level;
  std::string signal;
  int to_level;
  std::string target;
};

class HierarchyDiverged : public NetworkDiverged {
 public:
  HierarchyDiverged(const std::string& msg, int lvl) : NetworkDiverged(msg), level(lvl) {}
  int level;
};

struct LevelSnapshot {
  Vec h;
  Vec x;          // level input
  Vec e;          // reconstruction error x - Q h
  Vec u;          // control injected into this level's hidden layer
  Vec corrective; // signal this level sends down (controller output or twisted mismatch)
  Vec desired, experienced;
  double identification_residual = 0.0;  // |C h'_l - U h'_{l-1}| when C is set
};

struct Hierarchy {
  std::vector<HierarchyLevel> levels;
  bool top_twist = false;
  std::optional<DeconvUnit> top_deconv;
  double t = 0.0;

  int size() const { return static_cast<int>(levels.size()); }
  // Level whose hidden layer receives the top mismatch, or -1.
  int twist_target() const { return top_twist ? size() - 2 : -1; }
  std::vector<WiringEdge> wiring() const;
  void reset();
};

Hierarchy build_hierarchy(const std::vector<LevelSpec>& specs, bool top_twist = false);

std::vector<LevelSnapshot> step_hierarchy(Hierarchy& hier, const Vec& x, double dt);

struct FeedforwardLevelReport {
  int level;
  double residual;  // max over inputs of |h_one_sweep - h_relaxed|
  double tuning_distance;
  bool feedforward_equivalent;
};

std::vector<FeedforwardLevelReport> verify_feedforward(const Hierarchy& hier, const std::vector<Vec>& inputs,
                                                       double tol);

CsvTable snapshots_to_csv(const std::vector<std::vector<LevelSnapshot>>& run, int level, double dt);

Hierarchy hierarchy_from_json(const Json& j);

}  // namespace chf
