#pragma once

// nlohmann::json bindings for the types that cross file boundaries.

#include <json.hpp>

#include "pnr/estimation.hpp"
#include "pnr/model.hpp"
#include "pnr/povm.hpp"
#include "pnr/tagstream.hpp"

namespace pnr {

inline void to_json(nlohmann::json& j, const CountSummary& c) {
  j = nlohmann::json{
      {"pulses", c.pulses},
      {"c_i_total", c.threshold.idler},
      {"c_i_single", c.pnr_single.idler},
      {"c_i_multi", c.idler_multi},
      {"c_s1", c.signal1},
      {"c_s2", c.signal2},
      {"c_s1s2", c.signal1_signal2},
      {"c_is1_threshold", c.threshold.idler_signal1},
      {"c_is2_threshold", c.threshold.idler_signal2},
      {"c_is1s2_threshold", c.threshold.idler_signal1_signal2},
      {"c_is1_pnr", c.pnr_single.idler_signal1},
      {"c_is2_pnr", c.pnr_single.idler_signal2},
      {"c_is1s2_pnr", c.pnr_single.idler_signal1_signal2},
      {"orphans", c.orphans},
  };
}

inline void from_json(const nlohmann::json& j, CountSummary& c) {
  j.at("pulses").get_to(c.pulses);
  j.at("c_i_total").get_to(c.threshold.idler);
  j.at("c_i_single").get_to(c.pnr_single.idler);
  j.at("c_i_multi").get_to(c.idler_multi);
  j.at("c_s1").get_to(c.signal1);
  j.at("c_s2").get_to(c.signal2);
  c.signal1_signal2 = j.value("c_s1s2", std::uint64_t{0});
  j.at("c_is1_threshold").get_to(c.threshold.idler_signal1);
  j.at("c_is2_threshold").get_to(c.threshold.idler_signal2);
  j.at("c_is1s2_threshold").get_to(c.threshold.idler_signal1_signal2);
  j.at("c_is1_pnr").get_to(c.pnr_single.idler_signal1);
  j.at("c_is2_pnr").get_to(c.pnr_single.idler_signal2);
  j.at("c_is1s2_pnr").get_to(c.pnr_single.idler_signal1_signal2);
  c.orphans = j.value("orphans", std::uint64_t{0});
  c.validate();
}

inline void to_json(nlohmann::json& j, const G2Result& g) { j = nlohmann::json{{"value", g.value}, {"sigma", g.sigma}}; }

inline void to_json(nlohmann::json& j, const Estimate& e) { j = nlohmann::json{{"value", e.value}, {"sigma", e.sigma}}; }

inline void to_json(nlohmann::json& j, const Efficiencies& e) {
  j = nlohmann::json{{"eta_i", e.idler}, {"eta_s1", e.signal1}, {"eta_s2", e.signal2}};
}

inline void to_json(nlohmann::json& j, const PovmElement& p) {
  j = nlohmann::json{{"eta", p.eta},
                     {"k", p.k},
                     {"convention", p.normalized ? "normalized" : "unnormalized"},
                     {"coefficients", p.coeffs}};
}

inline void to_json(nlohmann::json& j, const SweepFit& f) {
  j = nlohmann::json{
      {"efficiencies",
       {{"eta_i", f.efficiencies.idler},
        {"eta_s1", f.efficiencies.signal1},
        {"eta_s2", f.efficiencies.signal2},
        {"implied_mu_max", f.efficiencies.implied_mu_max},
        {"out_of_regime", f.efficiencies.out_of_regime}}},
      {"mu", f.mus},
      {"tree_depth", {{"k", f.tree.k}, {"residual", f.tree.residual}, {"unimodal", f.tree.unimodal}}},
  };
}

}  // namespace pnr
