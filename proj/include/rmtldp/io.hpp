#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "devlab.hpp"
#include "errors.hpp"
#include "loggas.hpp"
#include "randsrc.hpp"
#include "rates.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "varopt.hpp"
#include "wigner.hpp"

namespace rmtldp {

using json = nlohmann::json;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

template <typename T>
T field(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidInput(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const TailProfile& p) {
  return {{"alpha", p.alpha},
          {"a", p.a},
          {"b", p.b},
          {"t0", p.t0},
          {"phase_diag", to_string(p.phase_diag)},
          {"phase_offdiag", to_string(p.phase_offdiag)},
          {"normalize_variance", p.normalize_variance}};
}

inline TailProfile tail_profile_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("tail profile must be a JSON object");
  TailProfile p;
  p.alpha = detail::field(j, "alpha", p.alpha);
  p.a = detail::field(j, "a", p.a);
  p.b = detail::field(j, "b", p.b);
  p.t0 = detail::field(j, "t0", p.t0);
  p.phase_diag = phase_law_from_string(detail::field<std::string>(j, "phase_diag", to_string(p.phase_diag)));
  p.phase_offdiag = phase_law_from_string(detail::field<std::string>(j, "phase_offdiag", to_string(p.phase_offdiag)));
  p.normalize_variance = detail::field(j, "normalize_variance", p.normalize_variance);
  p.validate();
  return p;
}

inline json to_json(const GaussianProfile& g) { return {{"sigma2", g.sigma2}, {"beta", g.beta}}; }

inline GaussianProfile gaussian_profile_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("Gaussian profile must be a JSON object");
  GaussianProfile g;
  g.sigma2 = detail::field(j, "sigma2", g.sigma2);
  g.beta = detail::field(j, "beta", g.beta);
  g.validate();
  return g;
}

inline json to_json(const Potential& v) {
  return {{"b", v.b}, {"alpha", v.alpha}, {"w", to_string(v.w)}, {"c", v.c}, {"beta", v.beta}};
}

inline Potential potential_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("potential must be a JSON object");
  Potential v;
  v.b = detail::field(j, "b", v.b);
  v.alpha = detail::field(j, "alpha", v.alpha);
  v.w = remainder_from_string(detail::field<std::string>(j, "w", to_string(v.w)));
  v.c = detail::field(j, "c", v.c);
  v.beta = detail::field(j, "beta", v.beta);
  v.validate();
  return v;
}

/// {"kind": "gaussian", sigma2, beta} or {"kind": "wigner_no_gaussian_tail", ...profile}.
inline json to_json(const EntrySource& src) {
  if (const auto* g = std::get_if<GaussianProfile>(&src)) {
    json j = to_json(*g);
    j["kind"] = "gaussian";
    return j;
  }
  json j = to_json(std::get<WgEntryLaw>(src).profile());
  j["kind"] = "wigner_no_gaussian_tail";
  return j;
}

inline EntrySource entry_source_from_json(const json& j) {
  const auto kind = detail::required<std::string>(j, "kind");
  if (kind == "gaussian") return gaussian_profile_from_json(j);
  if (kind == "wigner_no_gaussian_tail") return WgEntryLaw(tail_profile_from_json(j));
  throw InvalidInput("unknown Wigner model kind '" + kind + "'");
}

inline json to_json(const RateSpec& s) {
  json params;
  switch (s.theorem) {
    case RateTheorem::BetaEnsemble: params = to_json(std::get<Potential>(s.params)); break;
    case RateTheorem::Gaussian: params = to_json(std::get<GaussianProfile>(s.params)); break;
    case RateTheorem::WignerNoGaussianTail: {
      const auto& t = std::get<TailRateParams>(s.params);
      params = {{"c_p", t.cp}, {"alpha", t.alpha}};
      break;
    }
    case RateTheorem::TruncatedMoment: {
      const auto& t = std::get<TruncatedRateParams>(s.params);
      params = {{"b", t.b}, {"alpha", t.alpha}};
      break;
    }
  }
  return {{"theorem", to_string(s.theorem)}, {"p", s.p}, {"params", params}, {"center", s.center}};
}

/// The center may be omitted except for beta-ensembles, where it is the
/// equilibrium moment and must be supplied.
inline RateSpec rate_spec_from_json(const json& j) {
  const auto theorem = rate_theorem_from_string(detail::required<std::string>(j, "theorem"));
  const int p = detail::required<int>(j, "p");
  const json params = j.contains("params") ? j.at("params") : json::object();
  switch (theorem) {
    case RateTheorem::Gaussian: {
      auto s = gaussian_rate_spec(gaussian_profile_from_json(params), p);
      s.center = detail::field(j, "center", s.center);
      s.validate();
      return s;
    }
    case RateTheorem::WignerNoGaussianTail: {
      auto s = wg_rate_spec(detail::required<double>(params, "c_p"), detail::required<double>(params, "alpha"), p);
      s.center = detail::field(j, "center", s.center);
      s.validate();
      return s;
    }
    case RateTheorem::BetaEnsemble:
      return beta_rate_spec(potential_from_json(params), p, detail::required<double>(j, "center"));
    case RateTheorem::TruncatedMoment: {
      auto s = truncated_rate_spec(detail::field(params, "b", 1.0), detail::field(params, "alpha", 2.0), p);
      s.center = detail::field(j, "center", s.center);
      s.validate();
      return s;
    }
  }
  throw InvalidInput("unreachable rate theorem");
}

inline json to_json(const Stream& s) {
  return {{"seed", s.seed()}, {"stream", s.stream_id()}, {"position", s.position()}};
}

inline Stream stream_from_json(const json& j) {
  return Stream(detail::required<std::uint64_t>(j, "seed"), detail::required<std::uint64_t>(j, "stream"),
                detail::required<std::uint64_t>(j, "position"));
}

/// {potential, N, lambdas, step, sweep_count, rng_state}.
inline json checkpoint_to_json(const Potential& v, const GasState& s) {
  return {{"potential", to_json(v)},  {"N", s.lambdas.size()},         {"lambdas", s.lambdas},
          {"step", s.step},           {"sweep_count", s.sweep_count}, {"rng_state", to_json(s.rng)}};
}

struct Checkpoint {
  Potential potential;
  GasState state;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  c.potential = potential_from_json(detail::required<json>(j, "potential"));
  c.state.lambdas = detail::required<std::vector<double>>(j, "lambdas");
  if (c.state.lambdas.size() != detail::required<std::size_t>(j, "N"))
    throw InvalidInput("checkpoint: N does not match the number of lambdas");
  if (c.state.lambdas.size() < 2) throw InvalidInput("checkpoint: N must be >= 2");
  c.state.step = detail::required<double>(j, "step");
  if (!(c.state.step > 0.0)) throw InvalidInput("checkpoint: step must be positive");
  c.state.sweep_count = detail::required<std::uint64_t>(j, "sweep_count");
  c.state.rng = stream_from_json(detail::required<json>(j, "rng_state"));
  return c;
}

inline json to_json(const CpResult& r) {
  json support = json::array();
  for (const auto& e : r.argmin.support) support.push_back({{"i", e.i}, {"j", e.j}, {"value", e.value}});
  json j = {{"alpha", r.alpha}, {"a", r.a},           {"b", r.b},
            {"p", r.p},         {"value", r.value},   {"argmin_dim", r.argmin.n},
            {"argmin_support", support},              {"restarts", r.restarts}};
  j["bracket"] = r.bracket_checked ? json::array({r.lo, r.hi}) : json(nullptr);
  return j;
}

inline json to_json(const DeviationEstimate& e) {
  return {{"n", e.n},
          {"x", e.x},
          {"method", e.method},
          {"p_hat", e.p_hat},
          {"stderr", e.stderr_},
          {"ci", {e.ci.lo, e.ci.hi}},
          {"n_trials", e.n_trials},
          {"hits", e.hits},
          {"slope", std::isfinite(e.slope) ? json(e.slope) : json("inf")},
          {"ess", e.ess},
          {"flagged", e.flagged}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace rmtldp
