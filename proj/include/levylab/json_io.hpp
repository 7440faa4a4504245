#pragma once

// JSON configuration for triplet fields and JSON serialization of reports.
//
// Triplet config:
//   {
//     "dim": 1,
//     "drift": [0.5] or ["-x1"],          numbers or expressions in x1..xd
//     "gamma": [[1.0]],                   optional, default 0
//     "nu": {"kind": "none"}
//         | {"kind": "stable", "c": 1, "alpha": "1 + 0.2*sin(x1)", "killing": 0}
//         | {"kind": "atoms", "atoms": [{"jump": [0.5], "mass": 1}, {"cemetery": true, "mass": 0.1}]}
//   }
// Atom jumps are relative to the base point.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "levylab/diagnostics.hpp"
#include "levylab/embedding.hpp"
#include "levylab/errors.hpp"
#include "levylab/expr.hpp"
#include "levylab/measure.hpp"
#include "levylab/operator.hpp"
#include "levylab/triplet.hpp"

namespace levylab {

using Json = nlohmann::json;

namespace detail {

// A coefficient that is either a number or an expression.
struct Coefficient {
  bool constant = true;
  double value = 0.0;
  std::optional<Expression> expr;

  double operator()(const Point& a) const { return constant ? value : (*expr)(a); }
};

inline Coefficient coefficient(const Json& j, std::size_t dim, const std::string& what) {
  if (j.is_number()) return {true, j.get<double>(), std::nullopt};
  if (j.is_string()) return {false, 0.0, Expression::parse(j.get<std::string>(), dim)};
  throw ValidationError("config: " + what + " must be a number or an expression string");
}

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError("config: " + where + " is missing \"" + key + "\"");
  return j.at(key);
}

inline Point vector_of(const Json& j, std::size_t dim, const std::string& what) {
  if (!j.is_array() || j.size() != dim) {
    throw ValidationError("config: " + what + " must be an array of " + std::to_string(dim) + " numbers");
  }
  Point p(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw ValidationError("config: " + what + " entries must be numbers");
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return p;
}

}  // namespace detail

/// Builds a triplet field from its JSON description; the field is constant
/// when no coefficient is an expression.
inline TripletField triplet_field_from_json(const Json& config) {
  try {
    const auto dim_j = detail::require(config, "dim", "triplet");
    if (!dim_j.is_number_integer() || dim_j.get<long long>() < 1) throw ValidationError("config: dim must be >= 1");
    const auto dim = dim_j.get<std::size_t>();
    const auto d = static_cast<Eigen::Index>(dim);
    bool constant = true;

    std::vector<detail::Coefficient> drift;
    if (config.contains("drift")) {
      const Json& dj = config.at("drift");
      if (!dj.is_array() || dj.size() != dim) throw ValidationError("config: drift must have dim entries");
      for (const auto& e : dj) drift.push_back(detail::coefficient(e, dim, "drift entry"));
    } else {
      drift.assign(dim, detail::Coefficient{});
    }
    std::vector<detail::Coefficient> gamma(dim * dim);
    if (config.contains("gamma")) {
      const Json& gj = config.at("gamma");
      if (!gj.is_array() || gj.size() != dim) throw ValidationError("config: gamma must be a dim x dim array");
      for (std::size_t i = 0; i < dim; ++i) {
        if (!gj[i].is_array() || gj[i].size() != dim) throw ValidationError("config: gamma must be a dim x dim array");
        for (std::size_t k = 0; k < dim; ++k) gamma[i * dim + k] = detail::coefficient(gj[i][k], dim, "gamma entry");
      }
    }
    for (const auto& c : drift) constant = constant && c.constant;
    for (const auto& c : gamma) constant = constant && c.constant;

    enum class Kind { None, Stable, Atoms } kind = Kind::None;
    detail::Coefficient c_coef{true, 1.0, std::nullopt};
    detail::Coefficient alpha_coef{true, 1.0, std::nullopt};
    double killing = 0.0;
    std::vector<std::pair<Point, double>> jumps;
    double cemetery_mass = 0.0;
    if (config.contains("nu")) {
      const Json& nj = config.at("nu");
      const auto kind_name = detail::require(nj, "kind", "nu").get<std::string>();
      if (kind_name == "stable") {
        kind = Kind::Stable;
        c_coef = detail::coefficient(detail::require(nj, "c", "nu"), dim, "nu.c");
        alpha_coef = detail::coefficient(detail::require(nj, "alpha", "nu"), dim, "nu.alpha");
        killing = nj.value("killing", 0.0);
        constant = constant && c_coef.constant && alpha_coef.constant;
      } else if (kind_name == "atoms") {
        kind = Kind::Atoms;
        for (const auto& aj : detail::require(nj, "atoms", "nu")) {
          const double mass = detail::require(aj, "mass", "atom").get<double>();
          if (aj.value("cemetery", false)) {
            cemetery_mass += mass;
          } else {
            jumps.emplace_back(detail::vector_of(detail::require(aj, "jump", "atom"), dim, "atom jump"), mass);
          }
        }
      } else if (kind_name != "none") {
        throw ValidationError("config: unknown nu kind '" + kind_name + "' (expected none, stable or atoms)");
      }
    }

    auto build = [=](const Point& a) {
      Point delta(d);
      Matrix g(d, d);
      for (Eigen::Index i = 0; i < d; ++i) {
        delta[i] = drift[static_cast<std::size_t>(i)](a);
        for (Eigen::Index k = 0; k < d; ++k) g(i, k) = gamma[static_cast<std::size_t>(i * d + k)](a);
      }
      JumpMeasure nu = JumpMeasure::zero(dim);
      if (kind == Kind::Stable) {
        nu = StableLike{dim, c_coef(a), alpha_coef(a), 0.0, killing};
      } else if (kind == Kind::Atoms) {
        Atoms atoms = Atoms::from_jumps(a, jumps);
        if (cemetery_mass > 0.0) atoms.atoms.push_back({std::nullopt, cemetery_mass});
        nu = std::move(atoms);
      }
      return LevyTriplet(std::move(delta), std::move(g), std::move(nu));
    };
    // Relative atoms move with the base point, so only atom-free constant
    // configs are constant fields.
    if (constant && kind != Kind::Atoms) return TripletField::constant(build(Point::Zero(d)));
    return TripletField(dim, build);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

inline CompensationFunction compensation_from_name(const std::string& name) {
  if (name == "chi1") return CompensationFunction::chi1();
  if (name == "chi2") return CompensationFunction::chi2();
  throw ValidationError("unknown compensation function '" + name + "' (expected chi1 or chi2)");
}

inline Box box_from_json(const Json& j, std::size_t dim) {
  return {detail::vector_of(detail::require(j, "lo", "box"), dim, "box.lo"),
          detail::vector_of(detail::require(j, "hi", "box"), dim, "box.hi")};
}

inline Json to_json(const Point& p) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(p[i]);
  return out;
}

inline Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json to_json(const ConvergenceReport& r) {
  return {{"drift_gap", r.drift_gap}, {"jump_gap", r.jump_gap}, {"carre_gap", to_json(r.carre_gap)}};
}

inline Json to_json(const PmpReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"function", e.function},
                       {"argmax", to_json(e.argmax)},
                       {"max_value", e.max_value},
                       {"operator_value", e.operator_value},
                       {"checked", e.checked},
                       {"violated", e.violated}});
  }
  return {{"passed", r.passed()}, {"violations", r.violations}, {"entries", std::move(entries)}};
}

inline Json to_json(const HypothesisCheck& c) {
  Json where = Json::array();
  for (const auto& p : c.violations) where.push_back(to_json(p));
  return {{"passed", c.passed}, {"constant", c.constant}, {"violations", std::move(where)}, {"messages", c.messages}};
}

inline Json to_json(const HypothesisReport& r) {
  return {{"all_passed", r.all_passed()},
          {"h1", to_json(r.h1)},
          {"h2", to_json(r.h2)},
          {"h3", to_json(r.h3)},
          {"chi_sup", r.chi_sup}};
}

inline Json to_json(const KsResult& r) { return {{"statistic", r.statistic}, {"p_value", r.p_value}}; }

inline Json to_json(const DoobReport& r) {
  return {{"bound", r.bound},
          {"frequency", r.frequency},
          {"standard_error", r.standard_error},
          {"trials", r.trials},
          {"passed", r.passed}};
}

inline Json to_json(const ExplosionReport& r) {
  return {{"times", r.times},
          {"exploded_fraction", r.exploded_fraction},
          {"final_fraction", r.final_fraction},
          {"earliest_explosion", std::isfinite(r.earliest_explosion) ? Json(r.earliest_explosion) : Json(nullptr)},
          {"absorption_holds", r.absorption_holds}};
}

inline Json to_json(const ResidualReport& r) {
  std::vector<bool> passed(r.passed.begin(), r.passed.end());
  return {{"times", r.times},
          {"mean", r.mean},
          {"standard_error", r.standard_error},
          {"allowance", r.allowance},
          {"passed", passed},
          {"all_passed", r.all_passed},
          {"degenerate", r.degenerate}};
}

}  // namespace levylab
