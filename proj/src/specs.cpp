#include "chf/hierarchy.hpp"

namespace chf {

namespace {

Mat opt_mat(const Json& j, const char* key) { return j.contains(key) ? mat_from_json(j.at(key)) : Mat(); }

ReconNet net_from_json(const Json& j) {
  if (!j.contains("W") || !j.contains("Q")) throw ParamError("level needs W and Q");
  ReconNet n = ReconNet::make(mat_from_json(j.at("W")), mat_from_json(j.at("Q")));
  if (j.contains("N")) n.N = mat_from_json(j.at("N"));
  if (j.contains("M")) n.M = mat_from_json(j.at("M"));
  if (j.contains("P")) n.P = mat_from_json(j.at("P"));
  if (j.contains("B_ctrl")) n.B_ctrl = mat_from_json(j.at("B_ctrl"));
  if (j.contains("h0")) n.h = vec_from_json(j.at("h0"));
  n.theta = j.value("theta", 0.0);
  n.alpha = j.value("alpha", 0.0);
  n.literal_sign = j.value("literal_sign", false);
  return n;
}

}  // namespace

Hierarchy hierarchy_from_json(const Json& j) {
  if (!j.contains("levels") || !j.at("levels").is_array()) throw ParamError("hierarchy spec needs a levels array");
  std::vector<LevelSpec> specs;
  for (const Json& lj : j.at("levels")) {
    LevelSpec sp;
    sp.net = net_from_json(lj);
    sp.U = opt_mat(lj, "U");
    sp.C = opt_mat(lj, "C");
    sp.V = opt_mat(lj, "V");
    sp.T = opt_mat(lj, "T");
    sp.twist = opt_mat(lj, "twist");
    sp.kappa = lj.value("kappa", 1.0);
    sp.control_enabled = lj.value("control_enabled", true);
    if (lj.contains("controller") && !lj.at("controller").is_null()) {
      const Json& cj = lj.at("controller");
      Mat A = mat_from_json(cj.at("A_hat"));
      Mat B = cj.contains("B_hat") ? mat_from_json(cj.at("B_hat")) : A;
      sp.controller = SdsController(AffineIdModel::constant(B), AffineIdModel::constant(A), cj.value("gain", 4.0),
                                    static_cast<int>(A.rows()));
    }
    specs.push_back(std::move(sp));
  }
  return build_hierarchy(specs, j.value("top_twist", false));
}

}  // namespace chf
