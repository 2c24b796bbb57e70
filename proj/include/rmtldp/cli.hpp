#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rmtldp.hpp"

namespace rmtldp::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kInvalid = 2, kCertificate = 3, kFlagged = 4 };

struct RunConfig {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";

  std::string config_hash() const { return hex64(fnv1a64(config.dump())); }
};

struct Output {
  std::string text;
  int code = kOk;
};

inline json meta(const RunConfig& rc) {
  return {{"tool", "rmtldp"},       {"version", kVersion},       {"schema", kOutputSchema},
          {"command", rc.command}, {"config_hash", rc.config_hash()}, {"seed", rc.seed}};
}

inline std::string csv_header(const RunConfig& rc) {
  return "# rmtldp version=" + std::string(kVersion) + " schema=" + std::to_string(kOutputSchema) +
         " command=" + rc.command + " config_hash=" + rc.config_hash() + " seed=" + std::to_string(rc.seed) +
         "\n";
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline const std::string& fmt(const RunConfig& rc) {
  if (rc.format != "csv" && rc.format != "json") throw InvalidInput("format must be csv or json");
  return rc.format;
}

/// Rate curve (x, J_p(x)) over {"grid": {from, to, points}}.
inline Output cmd_rate(const RunConfig& rc) {
  const auto spec = rate_spec_from_json(detail::required<json>(rc.config, "rate"));
  const json grid = rc.config.value("grid", json{{"from", spec.center - 1.0}, {"to", spec.center + 3.0}, {"points", 41}});
  const double from = detail::required<double>(grid, "from");
  const double to = detail::required<double>(grid, "to");
  const int points = detail::required<int>(grid, "points");
  if (points < 2 || !(to > from)) throw InvalidInput("grid needs points >= 2 and to > from");
  const double speed = speed_exponent(spec);
  std::vector<std::pair<double, ExtendedReal>> rows;
  for (int i = 0; i < points; ++i) {
    const double x = from + (to - from) * i / (points - 1);
    rows.emplace_back(x, rate_value(spec, x));
  }
  std::ostringstream os;
  if (fmt(rc) == "csv") {
    os << csv_header(rc) << "# theorem=" << to_string(spec.theorem) << " p=" << spec.p
       << " speed=" << format_double(speed) << " center=" << format_double(spec.center) << "\n";
    os << "x,J\n";
    for (const auto& [x, j] : rows) os << format_double(x) << "," << j.to_string() << "\n";
  } else {
    json arr = json::array();
    for (const auto& [x, j] : rows)
      arr.push_back({{"x", x}, {"J", j.is_infinite() ? json("inf") : json(j.value())}});
    os << dump({{"meta", meta(rc)}, {"rate", to_json(spec)}, {"speed", speed}, {"rows", arr}});
  }
  return {os.str(), kOk};
}

/// solve_cp on {alpha, a, b, p, n_max?, budget?}.
inline Output cmd_varopt(const RunConfig& rc) {
  const auto& c = rc.config;
  CpOptions opt;
  opt.seed = rc.seed;
  opt.n_max = detail::field<std::size_t>(c, "n_max", opt.n_max);
  opt.budget = detail::field<std::size_t>(c, "budget", opt.budget);
  opt.phase_diag = phase_law_from_string(detail::field<std::string>(c, "phase_diag", "sign"));
  opt.phase_offdiag = phase_law_from_string(detail::field<std::string>(c, "phase_offdiag", "sign"));
  const auto r = solve_cp(detail::required<double>(c, "alpha"), detail::required<double>(c, "a"),
                          detail::required<double>(c, "b"), detail::required<int>(c, "p"), opt);
  std::ostringstream os;
  if (fmt(rc) == "json") {
    json j = to_json(r);
    j["meta"] = meta(rc);
    os << dump(j);
  } else {
    os << csv_header(rc) << "alpha,a,b,p,value,bracket_lo,bracket_hi,argmin_dim,argmin_support,seed\n";
    std::string support;
    for (const auto& e : r.argmin.support)
      support += (support.empty() ? "" : ";") + std::to_string(e.i) + ":" + std::to_string(e.j) + ":" +
                 format_double(e.value);
    os << format_double(r.alpha) << "," << format_double(r.a) << "," << format_double(r.b) << "," << r.p << ","
       << format_double(r.value) << "," << (r.bracket_checked ? format_double(r.lo) : "") << ","
       << (r.bracket_checked ? format_double(r.hi) : "") << "," << r.argmin.n << "," << support << "," << rc.seed
       << "\n";
  }
  return {os.str(), kOk};
}

/// Tail estimates per n on {model, p, x, n_grid, trials, method?}.
inline Output cmd_deviations(const RunConfig& rc) {
  const auto& c = rc.config;
  const EntrySource src = entry_source_from_json(detail::required<json>(c, "model"));
  const int p = detail::required<int>(c, "p");
  const double x = detail::required<double>(c, "x");
  const auto grid = detail::required<std::vector<std::size_t>>(c, "n_grid");
  const auto trials = detail::required<std::size_t>(c, "trials");
  const auto method = detail::field<std::string>(c, "method", "auto");
  if (grid.empty()) throw InvalidInput("n_grid must not be empty");
  if (method != "auto" && method != "naive" && method != "planted_is")
    throw InvalidInput("method must be auto, naive or planted_is");
  const RateSpec spec = model_rate_spec(src, p);
  const double speed = speed_exponent(spec);
  std::vector<SlopeRow> rows;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::uint64_t s = rc.seed + k;
    if (method == "auto") {
      rows.push_back(slope_row(src, p, x, grid[k], trials, s, speed));
      continue;
    }
    SlopeRow row;
    row.n = grid[k];
    row.estimate = method == "naive" ? estimate_tail_naive(src, grid[k], p, x, trials, s)
                                     : estimate_tail_planted_is(src, grid[k], p, x, trials, s);
    row.slope = row.estimate.slope;
    row.flagged = row.estimate.flagged;
    rows.push_back(row);
  }
  bool flagged = false, monotone = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    flagged = flagged || rows[k].flagged;
    if (k > 0 && rows[k].slope < rows[k - 1].slope) monotone = false;
  }
  const std::string model = std::holds_alternative<GaussianProfile>(src) ? "gaussian" : "wigner_no_gaussian_tail";
  const ExtendedReal rate = rate_value(spec, x);
  std::ostringstream os;
  if (fmt(rc) == "csv") {
    os << csv_header(rc) << "# speed=" << format_double(speed) << " J=" << rate.to_string() << "\n";
    os << "model,n,p,x,method,p_hat,stderr,slope,ess,seed\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& e = rows[k].estimate;
      os << model << "," << rows[k].n << "," << p << "," << format_double(x) << "," << e.method << ","
         << format_double(e.p_hat) << "," << format_double(e.stderr_) << "," << format_double(rows[k].slope) << ","
         << format_double(e.ess) << "," << rc.seed + k << "\n";
    }
    if (rows.size() >= 3)
      os << "# last_slope=" << format_double(rows.back().slope) << " monotone=" << (monotone ? "true" : "false")
         << "\n";
  } else {
    json arr = json::array();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      json r = to_json(rows[k].estimate);
      r["seed"] = rc.seed + k;
      r["model"] = model;
      r["p"] = p;
      arr.push_back(r);
    }
    json summary = {{"speed", speed}, {"J", rate.is_infinite() ? json("inf") : json(rate.value())}};
    if (rows.size() >= 3) {
      summary["last_slope"] = std::isfinite(rows.back().slope) ? json(rows.back().slope) : json("inf");
      summary["monotone"] = monotone;
    }
    os << dump({{"meta", meta(rc)}, {"summary", summary}, {"rows", arr}});
  }
  return {os.str(), flagged ? kFlagged : kOk};
}

/// {"kind": "loggas", potential, N, sweeps, checkpoint?} or
/// {"kind": "wigner", model, n}.
inline Output cmd_sample(const RunConfig& rc) {
  const auto& c = rc.config;
  const auto kind = detail::required<std::string>(c, "kind");
  std::ostringstream os;
  if (kind == "loggas") {
    Potential v;
    GasState s;
    if (c.contains("checkpoint")) {
      auto cp = checkpoint_from_json(c.at("checkpoint"));
      v = cp.potential;
      s = std::move(cp.state);
    } else {
      v = potential_from_json(detail::field(c, "potential", json::object()));
      const auto n = detail::required<std::size_t>(c, "N");
      if (n < 2) throw InvalidInput("N must be >= 2");
      s = initial_state(v, n, Stream::derive(rc.seed, domain::kSample, 0));
    }
    const auto sweeps = detail::field<std::uint64_t>(c, "sweeps", 0);
    for (std::uint64_t k = 0; k < sweeps; ++k) mcmc_sweep_inplace(s, v);
    if (fmt(rc) == "json") {
      os << dump({{"meta", meta(rc)}, {"checkpoint", checkpoint_to_json(v, s)}});
    } else {
      os << csv_header(rc) << "# sweep_count=" << s.sweep_count << " step=" << format_double(s.step) << "\n";
      os << "i,lambda,seed\n";
      for (std::size_t i = 0; i < s.lambdas.size(); ++i)
        os << i << "," << format_double(s.lambdas[i]) << "," << rc.seed << "\n";
    }
  } else if (kind == "wigner") {
    const EntrySource src = entry_source_from_json(detail::required<json>(c, "model"));
    const auto n = detail::required<std::size_t>(c, "n");
    Stream rng = Stream::derive(rc.seed, domain::kSample, 0);
    const auto w = assemble_wigner(n, src, rng);
    const auto spec = eigvals(w.normalized);
    if (fmt(rc) == "json") {
      os << dump({{"meta", meta(rc)}, {"model", to_json(src)}, {"n", n}, {"eigenvalues", spec.values}});
    } else {
      os << csv_header(rc) << "i,lambda,seed\n";
      for (std::size_t i = 0; i < spec.values.size(); ++i)
        os << i << "," << format_double(spec.values[i]) << "," << rc.seed << "\n";
    }
  } else {
    throw InvalidInput("sample kind must be loggas or wigner");
  }
  return {os.str(), kOk};
}

/// Tail calibration report on {profile, role?, samples, t_grid}.
inline Output cmd_calibrate(const RunConfig& rc) {
  const auto& c = rc.config;
  const WgEntryLaw law(tail_profile_from_json(detail::field(c, "profile", json::object())));
  const auto role_name = detail::field<std::string>(c, "role", "offdiagonal");
  if (role_name != "diagonal" && role_name != "offdiagonal") throw InvalidInput("role must be diagonal or offdiagonal");
  const EntryRole role = role_name == "diagonal" ? EntryRole::Diagonal : EntryRole::OffDiagonal;
  const auto rows = tail_calibration_report(law, role, detail::field<std::uint64_t>(c, "samples", 1000000),
                                            detail::required<std::vector<double>>(c, "t_grid"), rc.seed);
  std::ostringstream os;
  if (fmt(rc) == "csv") {
    os << csv_header(rc) << "t,hits,samples,p_hat,ratio,ratio_lo,ratio_hi,below_onset,seed\n";
    for (const auto& r : rows)
      os << format_double(r.t) << "," << r.hits << "," << r.samples << "," << format_double(r.p_hat) << ","
         << format_double(r.ratio) << "," << format_double(r.ratio_lo) << "," << format_double(r.ratio_hi) << ","
         << (r.below_onset ? "true" : "false") << "," << rc.seed << "\n";
  } else {
    json arr = json::array();
    for (const auto& r : rows)
      arr.push_back({{"t", r.t},
                     {"hits", r.hits},
                     {"samples", r.samples},
                     {"p_hat", r.p_hat},
                     {"ratio", r.ratio},
                     {"ratio_ci", {r.ratio_lo, r.ratio_hi}},
                     {"below_onset", r.below_onset},
                     {"seed", rc.seed}});
    os << dump({{"meta", meta(rc)}, {"profile", to_json(law.profile())}, {"role", role_name}, {"rows", arr}});
  }
  return {os.str(), kOk};
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double wall_ms = 0.0;
};

namespace gen {

inline HermMatrix random_gaussian_herm(std::size_t n, int beta, Stream& rng) {
  return sample_raw_wigner(n, GaussianProfile{1.0, beta}, rng);
}

inline HermMatrix random_low_rank_herm(std::size_t n, std::size_t r, int beta, Stream& rng) {
  HermMatrix m(n, beta);
  for (std::size_t k = 0; k < r; ++k) {
    std::vector<cplx> v(n);
    for (auto& x : v) x = beta == 1 ? cplx(rng.normal(), 0.0) : cplx(rng.normal(), rng.normal());
    const double w = rng.normal();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        cplx z = w * v[i] * std::conj(v[j]);
        if (i == j) z = z.real();
        m.set(i, j, m(i, j) + z);
      }
  }
  return m;
}

}  // namespace gen

/// Deterministic checks behind `verify`. `rate_scale` multiplies the rate
/// under test and exists for negative controls.
inline std::vector<CheckResult> run_verify_checks(std::uint64_t seed, double rate_scale = 1.0) {
  std::vector<std::pair<std::string, std::function<std::pair<bool, std::string>()>>> checks;

  checks.emplace_back("rate_closed_form", [&] {
    const auto g = gaussian_rate_spec(GaussianProfile{1.0, 2}, 4);
    const double at3 = rate_scale * rate_value(g, 3.0).value();
    const bool below = rate_value(g, 1.0).is_infinite();
    const double wg = rate_scale * rate_value(wg_rate_spec(wg_cp_closed_form(1.0, 1.0, 1.0, 4), 1.0, 4), 3.0).value();
    const bool ok = std::abs(at3 - 0.5) < 1e-12 && below && std::abs(wg - std::pow(2.0, -0.25)) < 1e-12;
    return std::pair{ok, "J_4(3)=" + format_double(at3) + " wg=" + format_double(wg)};
  });
  checks.emplace_back("decompotrace", [&] {
    std::size_t bad = 0;
    for (std::size_t t = 0; t < 1000; ++t) {
      Stream rng = Stream::derive(seed, domain::kVerify, t);
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 31);
      const std::size_t r = 1 + static_cast<std::size_t>(rng.uniform() * 3);
      const int beta = 1 + static_cast<int>(t % 2);
      const auto h = gen::random_gaussian_herm(n, beta, rng) * (1.0 / std::sqrt(double(n)));
      const auto c = gen::random_low_rank_herm(n, std::min(r, n), beta, rng);
      bad += !decompotrace_check(h, c, 3 + static_cast<int>(t % 4)).ok;
    }
    return std::pair{bad == 0, std::to_string(bad) + " violations in 1000"};
  });
  checks.emplace_back("zhan", [&] {
    double worst = 0.0;
    for (std::size_t t = 0; t < 2000; ++t) {
      Stream rng = Stream::derive(seed, domain::kVerify, 10000 + t);
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 16);
      const auto m = n == 1 ? HermMatrix::diagonal(std::vector<double>{rng.normal()})
                            : gen::random_gaussian_herm(n, 1 + static_cast<int>(t % 2), rng);
      worst = std::min(worst, zhan_gap(m, 0.25 * (1 + t % 7)));
    }
    return std::pair{worst >= -1e-9, "min gap " + format_double(worst)};
  });
  checks.emplace_back("gaussian_q_bound", [&] {
    std::size_t bad = 0;
    for (std::size_t t = 0; t < 500; ++t) {
      Stream rng = Stream::derive(seed, domain::kVerify, 20000 + t);
      const int beta = 1 + static_cast<int>(t % 2);
      const double sigma2 = 0.25 + 2.0 * rng.uniform();
      const int p = 3 + static_cast<int>(t % 5);
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 6);
      const auto h = gen::random_gaussian_herm(n, beta, rng);
      const double lower = std::min(1.0 / sigma2, beta / 2.0) * std::pow(std::abs(trace_power(h, p)), 2.0 / p);
      bad += gaussian_q(h, sigma2, beta) < lower * (1.0 - 1e-12);
    }
    return std::pair{bad == 0, std::to_string(bad) + " violations in 500"};
  });
  checks.emplace_back("defH_witness", [&] {
    const double m = semicircle_moment(4);
    const auto h = defH_witness(200, m + 1.0, 4, m);
    const double q = gaussian_q(h, 1.0, 1);
    const double phi = gaussian_phi(h, 4);
    const bool ok = std::abs(q / 0.5 - 1.0) <= 0.02 && std::abs(phi - (m + 1.0)) <= 1e-10 * (m + 1.0);
    return std::pair{ok, "q=" + format_double(q) + " phi=" + format_double(phi)};
  });
  checks.emplace_back("inner_phi_inf", [&] {
    double worst = 0.0;
    for (int p : {4, 6, 8}) worst = std::max(worst, std::abs(inner_phi_inf(p, 4) - 1.0));
    return std::pair{worst <= 1e-9, "max |inf - 1| = " + format_double(worst)};
  });
  checks.emplace_back("cp_closed_form", [&] {
    CpOptions opt;
    opt.seed = seed;
    const double v = solve_cp(1.0, 1.0, 1.0, 4, opt).value;
    return std::pair{std::abs(v - std::pow(2.0, -0.25)) <= 1e-3, "c_4=" + format_double(v)};
  });
  checks.emplace_back("lemconv_trend", [&] {
    auto med = [&](std::size_t n) {
      std::vector<double> d;
      for (std::size_t r = 0; r < 20; ++r) {
        Stream rng = Stream::derive(seed, domain::kVerify, 30000 + 1000 * n + r);
        d.push_back(lemconv_discrepancy(n, 4, 1.0, 8, GaussianProfile{1.0, 1}, rng));
      }
      return median(d);
    };
    const double a = med(64), b = med(256);
    return std::pair{b < a, "median n=64 " + format_double(a) + " n=256 " + format_double(b)};
  });

  std::vector<CheckResult> out;
  for (auto& [name, fn] : checks) {
    CheckResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      std::tie(r.pass, r.detail) = fn();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

/// Config may carry {"fixture": {"rate_scale": s}} for negative controls.
inline Output cmd_verify(const RunConfig& rc) {
  double scale = 1.0;
  if (rc.config.contains("fixture")) scale = detail::field(rc.config.at("fixture"), "rate_scale", 1.0);
  const auto results = run_verify_checks(rc.seed, scale);
  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  std::ostringstream os;
  if (fmt(rc) == "json") {
    json arr = json::array();
    for (const auto& r : results)
      arr.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"wall_ms", r.wall_ms}});
    os << dump({{"meta", meta(rc)}, {"all_pass", all}, {"checks", arr}});
  } else {
    os << csv_header(rc) << "check,status,detail,wall_ms,seed\n";
    for (const auto& r : results) {
      char ms[32];
      std::snprintf(ms, sizeof ms, "%.1f", r.wall_ms);
      os << r.name << "," << (r.pass ? "PASS" : "FAIL") << ",\"" << r.detail << "\"," << ms << "," << rc.seed << "\n";
    }
  }
  return {os.str(), all ? kOk : kInvalid};
}

inline Output dispatch(const RunConfig& rc) {
  if (rc.command == "rate") return cmd_rate(rc);
  if (rc.command == "varopt") return cmd_varopt(rc);
  if (rc.command == "deviations") return cmd_deviations(rc);
  if (rc.command == "sample") return cmd_sample(rc);
  if (rc.command == "calibrate") return cmd_calibrate(rc);
  if (rc.command == "verify") return cmd_verify(rc);
  throw InvalidInput("unknown command '" + rc.command + "'");
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment large deviations toolkit for random matrices and log-gases", "rmtldp"};
  RunConfig rc;
  std::string config_path;
  app.add_option("--command", rc.command, "sample | rate | varopt | deviations | verify | calibrate")
      ->required()
      ->check(CLI::IsMember({"sample", "rate", "varopt", "deviations", "verify", "calibrate"}));
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", rc.seed, "master seed");
  app.add_option("--out", rc.out, "output file (default: stdout)");
  app.add_option("--format", rc.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.set_version_flag("--version", kVersion);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    app.exit(e, o, r);
    err << o.str() << r.str();
    return kInvalid;
  }
  try {
    if (!config_path.empty()) rc.config = read_json_file(config_path);
    if (!rc.config.is_object()) throw InvalidInput("config must be a JSON object");
    const Output res = dispatch(rc);
    if (rc.out.empty()) {
      out << res.text;
    } else {
      std::ofstream f(rc.out, std::ios::binary);
      if (!f) throw InvalidInput("cannot write '" + rc.out + "'");
      f << res.text;
    }
    if (res.code == kFlagged) err << "rmtldp: flagged statistical result\n";
    return res.code;
  } catch (const CertificateViolation& e) {
    err << "rmtldp: certificate violation: " << e.what() << "\n";
    return kCertificate;
  } catch (const CalibrationError& e) {
    err << "rmtldp: " << e.what() << " (minimal feasible t0 = " << format_double(e.min_feasible_t0()) << ")\n";
    return kInvalid;
  } catch (const InvalidInput& e) {
    err << "rmtldp: invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "rmtldp: internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace rmtldp::cli
