#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "stochsafe/certify.hpp"
#include "stochsafe/cli.hpp"
#include "stochsafe/config.hpp"
#include "stochsafe/mcsim.hpp"

namespace stochsafe::cli {

std::pair<int, int> parse_orders(const std::string& text) {
  const auto dots = text.find("..");
  int lo, hi;
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      lo = hi = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } else {
      const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
      lo = std::stoi(a, &used);
      if (used != a.size()) throw std::invalid_argument(text);
      hi = std::stoi(b, &used);
      if (used != b.size()) throw std::invalid_argument(text);
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("orders must look like A..B or A, got '" + text + "'");
  }
  if (lo < 1 || hi < lo) throw std::invalid_argument("order range must be nonempty and start at 1 or above");
  return {lo, hi};
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("expected comma-separated numbers, got '" + text + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("empty point");
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct OrderResult {
  int order = 0;
  std::optional<SolvedOrder> solved;
  std::optional<Certificate> cert;
  std::string error;
};

SafetyProblem load(const Options& o, bool apply_x0) {
  SafetyProblem p = load_problem(o.config);
  if (o.r0) p = with_initial_radius(p, *o.r0);
  if (o.horizon) p = with_horizon(p, *o.horizon);
  if (apply_x0 && o.x0) p = with_initial_point(p, *o.x0);
  return p;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Solves every order in the range on up to `o.jobs` threads; results come back in order.
std::vector<OrderResult> solve_orders(const SafetyProblem& p, const Options& o, Variant variant) {
  const int count = o.orders.second - o.orders.first + 1;
  std::vector<OrderResult> results(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  const auto work = [&] {
    for (int i; (i = next++) < count;) {
      auto& r = results[static_cast<std::size_t>(i)];
      r.order = o.orders.first + i;
      try {
        sdp::SolverOptions so;
        so.verbose = o.verbose;
        r.solved = solve_order(p, r.order, variant, so);
        r.cert = extract_certificate(*r.solved, true);
        VerifyOptions vo;
        vo.tolerance = o.tol;
        vo.seed = static_cast<unsigned>(o.seed);
        r.cert->report = verify_certificate(*r.cert, p, *r.solved, vo);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const unsigned workers = std::clamp<unsigned>(o.jobs, 1u, static_cast<unsigned>(count));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return results;
}

/// Solver failures outrank verification failures.
int exit_code(const std::vector<OrderResult>& rs, const Options& o) {
  int code = kOk;
  for (const auto& r : rs) {
    if (!r.cert) return kSolver;
    if (r.cert->status != sdp::SolveStatus::Optimal) {
      if (!o.allow_inexact) code = kSolver;
    } else if (!r.cert->report.passed() && code == kOk) {
      code = kVerify;
    }
  }
  return code;
}

void print_table(const std::vector<OrderResult>& rs, const char* what, std::ostream& out) {
  const auto row = [&](const std::string& name, auto cell) {
    out << std::left << std::setw(10) << name;
    for (const auto& r : rs) out << std::setw(18) << cell(r);
    out << '\n';
  };
  row("order", [](const OrderResult& r) { return std::to_string(r.order); });
  row(what, [](const OrderResult& r) { return r.cert ? fixed(r.cert->bound) : std::string("-"); });
  row("status", [](const OrderResult& r) {
    return r.solved ? std::string(sdp::to_string(r.solved->solution.status)) : std::string("error");
  });
  row("time_s", [](const OrderResult& r) { return r.solved ? fixed(r.solved->wall_time_s, 2) : std::string("-"); });
  row("verified", [](const OrderResult& r) { return r.cert ? std::string(r.cert->report.passed() ? "yes" : "no") : "-"; });
  for (const auto& r : rs)
    if (!r.error.empty()) out << "order " << r.order << ": " << r.error << '\n';
}

nlohmann::json record(const OrderResult& r) {
  if (r.cert) return bound_record(*r.cert, *r.solved);
  nlohmann::json j;
  j["order"] = r.order;
  j["bound"] = nullptr;
  j["solver_status"] = r.solved ? sdp::to_string(r.solved->solution.status) : "error";
  j["wall_time_s"] = r.solved ? r.solved->wall_time_s : 0.0;
  j["error"] = r.error;
  return j;
}

void write_certificates(const std::vector<OrderResult>& rs, const Options& o, const std::string& stem) {
  for (const auto& r : rs)
    if (r.cert) write_atomic(o.out / (stem + "_k" + std::to_string(r.order) + ".json"), dump(to_json(*r.cert)));
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kConfig;
  }
}

mc::SimConfig sim_config(const Options& o) {
  mc::SimConfig c;
  c.dt = o.dt;
  c.n = o.n;
  c.seed = o.seed;
  c.x0 = o.x0;
  c.x0_count = o.x0_count;
  if (o.sampling == "fixed") c.sampling = mc::InitialSampling::FixedPoint;
  else if (o.sampling == "uniform") c.sampling = mc::InitialSampling::Uniform;
  else if (o.sampling == "grid") c.sampling = mc::InitialSampling::Grid;
  else throw std::invalid_argument("sampling must be fixed, uniform or grid");
  return c;
}

}  // namespace

int cmd_bound(const Options& o, std::ostream& out) {
  return guarded([&] {
    const SafetyProblem p = load(o, true);
    const auto rs = solve_orders(p, o, Variant::UnsafeBound);
    print_table(rs, "bound", out);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rs) table.push_back(record(r));
    write_atomic(o.out / "bounds.json", dump(table));
    write_certificates(rs, o, "certificate");
    return exit_code(rs, o);
  });
}

int cmd_contour(const Options& o, std::ostream& out) {
  return guarded([&] {
    const SafetyProblem p = load(o, false);
    const auto rs = solve_orders(p, o, Variant::RiskContour);
    print_table(rs, "J", out);
    std::vector<Certificate> certs;
    for (const auto& r : rs)
      if (r.cert) certs.push_back(*r.cert);

    nlohmann::json j;
    j["problem"] = p.name;
    nlohmann::json orders = nlohmann::json::array();
    for (const auto& r : rs) orders.push_back(record(r));
    j["orders"] = orders;
    const auto x0 = o.x0 ? o.x0 : p.X0.center;
    if (x0 && !certs.empty()) {
      const auto z = p.point(p.t0, *x0);
      double best = 1.0;
      nlohmann::json vals = nlohmann::json::array();
      for (const auto& c : certs) {
        const double v = c.v.evaluate(z);
        best = std::min(best, v);
        vals.push_back({{"order", c.order}, {"v", v}});
      }
      j["x0"] = *x0;
      j["v_x0"] = vals;
      j["q_x0"] = std::clamp(best, 0.0, 1.0);
      out << "q(x0) = " << fixed(std::clamp(best, 0.0, 1.0)) << '\n';
    }
    if (!certs.empty()) {
      const auto grid = risk_grid(certs, p, o.grid, o.grid_time);
      std::ostringstream csv;
      write_grid_csv(grid, csv);
      write_atomic(o.out / "contour.csv", csv.str());
      j["grid"] = "contour.csv";
      j["grid_time"] = o.grid_time.value_or(p.t0);
    }
    write_atomic(o.out / "contour.json", dump(j));
    write_certificates(rs, o, "risk_certificate");
    return exit_code(rs, o);
  });
}

int cmd_simulate(const Options& o, std::ostream& out) {
  return guarded([&] {
    const SafetyProblem p = load(o, false);
    const auto cfg = sim_config(o);
    const auto est = mc::estimate_unsafe(p, cfg);
    const auto j = mc::to_json(est);
    write_atomic(o.out / "estimate.json", dump(j));
    if (o.trajectories > 0) {
      const mc::Simulator sim(p, cfg.tol);
      const auto x0s = mc::initial_points(p, cfg);
      const double dt = cfg.dt.value_or(cfg.dt_scaled * (p.T - p.t0));
      for (int i = 0; i < o.trajectories; ++i) {
        auto rng = mc::trajectory_rng(cfg.seed, static_cast<std::uint64_t>(i));
        const auto tr = sim.run(x0s.front(), dt, rng, true);
        std::ostringstream csv;
        mc::write_trajectory_csv(p, tr, csv);
        write_atomic(o.out / ("trajectory_" + std::to_string(i) + ".csv"), csv.str());
      }
    }
    out << "p_hat = " << est.p_hat << "  99% CI [" << est.ci_lo << ", " << est.ci_hi << "]  N = " << est.n
        << "  hits = " << est.hits << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_verify(const Options& o, std::ostream& out) {
  return guarded([&] {
    const SafetyProblem p = load(o, !o.risk);
    const Variant variant = o.risk ? Variant::RiskContour : Variant::UnsafeBound;
    const auto rs = solve_orders(p, o, variant);
    print_table(rs, o.risk ? "v(x0)" : "bound", out);

    auto cfg = sim_config(o);
    if (!o.risk && p.X0.radius > 0.0 && o.sampling == "fixed") cfg.sampling = mc::InitialSampling::Grid;
    const auto est = mc::estimate_unsafe(p, cfg);
    const auto x0s = mc::initial_points(p, cfg);

    nlohmann::json j;
    j["problem"] = p.name;
    j["variant"] = to_string(variant);
    j["estimate"] = mc::to_json(est);
    nlohmann::json orders = nlohmann::json::array();
    bool sound = true;
    for (const auto& r : rs) {
      nlohmann::json row = record(r);
      if (r.cert) {
        row["verification"] = to_json(r.cert->report);
        try {
          row["moments"] = to_json(moment_diagnostics(*r.solved));
        } catch (const CertificateError& e) {
          row["moments"] = e.what();
        }
        // Risk certificates are compared at the simulated initial point.
        const double bound = o.risk ? r.cert->v.evaluate(p.point(p.t0, x0s.front())) : r.cert->bound;
        const bool ok = est.p_hat <= bound + 3.0 * est.se;
        row["soundness"] = {{"bound", bound}, {"p_hat", est.p_hat}, {"se", est.se}, {"pass", ok}};
        sound = sound && ok;
        out << "order " << r.order << ": p_hat " << est.p_hat << " <= " << fixed(bound) << " + 3se: " << (ok ? "yes" : "no")
            << '\n';
      }
      orders.push_back(row);
    }
    j["orders"] = orders;
    write_atomic(o.out / "verify.json", dump(j));
    const int code = exit_code(rs, o);
    return code != kOk ? code : (sound ? static_cast<int>(kOk) : static_cast<int>(kVerify));
  });
}

int cmd_export(const Options& o, std::ostream& out) {
  return guarded([&] {
    const SafetyProblem p = load(o, !o.risk);
    const int k = o.orders.first;
    const auto [scaled, rec] = scale_problem(p);
    const auto prog = o.risk ? build_risk_sdp(scaled, k) : build_unsafe_sdp(scaled, k);
    std::vector<std::string> names(static_cast<std::size_t>(prog.sdp.num_free()));
    for (std::size_t i = 0; i < names.size(); ++i) names[i] = "x" + std::to_string(i);
    if (prog.variant == Variant::UnsafeBound) names[static_cast<std::size_t>(prog.gamma)] = "gamma";
    for (std::size_t i = 0; i < prog.v_basis.size(); ++i) {
      std::string n = "v";
      for (int e : prog.v_basis[i].exponents()) n += "_" + std::to_string(e);
      names[static_cast<std::size_t>(prog.v_offset) + i] = n;
    }
    std::ostringstream sdpa;
    const auto manifest = sdp::export_sdpa(prog.sdp, sdpa, names);
    const std::string stem = p.name + "_" + to_string(prog.variant) + "_k" + std::to_string(k);
    write_atomic(o.out / (stem + ".dat-s"), sdpa.str());
    write_atomic(o.out / (stem + ".manifest.json"), manifest.to_json());
    out << "wrote " << (o.out / (stem + ".dat-s")).string() << " (" << prog.sdp.num_rows() << " rows, "
        << prog.sdp.blocks.size() << " blocks)\n";
    return static_cast<int>(kOk);
  });
}

}  // namespace stochsafe::cli
