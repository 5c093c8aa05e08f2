// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [work_dir]
//
// Set PINNEIG_ACCEPT_4D=1 to add the (slow) four-dimensional ball scan.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "../derivative_checks.hpp"
#include "pinneig/cli.hpp"
#include "pinneig/snapshot.hpp"

using namespace pinneig;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

// Runs `body`, turning exceptions into a FAIL line.
void criterion(const std::string& name, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("error: ") + e.what());
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  [" << name << " took " << std::round(s) << " s]" << std::endl;
}

struct ScanRun {
  RunConfig config;
  fs::path dir;
  std::vector<StoredEstimate> estimates;
};

ScanRun scan(const fs::path& dir, const std::string& config_text) {
  ScanRun run{parse_config(config_text), dir, {}};
  fs::remove_all(dir);
  std::ostringstream log, err;
  if (cmd_scan(run.config, dir, log, err) != 0) throw std::runtime_error("scan failed: " + err.str());
  run.estimates = read_estimates(dir);
  return run;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(8);
  os << x;
  return os.str();
}

std::string list(const std::vector<StoredEstimate>& est) {
  std::string s = "[";
  for (std::size_t k = 0; k < est.size(); ++k) s += (k ? ", " : "") + fmt(est[k].e_hat);
  return s + "]";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::create_directories(work);
  std::cout.setf(std::ios::unitbuf);

  // Fast criteria first.
  criterion("derivative suite", [] {
    SplitMix64 rng(20240601);
    double worst_jet = 0.0, worst_grad = 0.0;
    for (int c = 0; c < 100; ++c) {
      const int d = 1 + static_cast<int>(rng.next() % 4);
      const auto params = init_params(NetShape{d, 32, 32}, rng.next());
      Eigen::VectorXd x(d);
      for (int i = 0; i < d; ++i) x[i] = rng.uniform(-1.0, 1.0);
      worst_jet = std::max(worst_jet, checks::jet_fd_error(params, x));
    }
    for (int c = 0; c < 100; ++c) {
      const int d = 2 + static_cast<int>(rng.next() % 3);
      const auto params = init_params(NetShape{d, 32, 32}, rng.next());
      const auto domain = Domain::ball(d);
      const auto trial = make_trial_batch(domain, sample_interior(domain, 16, rng.next()));
      const auto lg = loss_gradient(params, trial, checks::probe_loss);
      auto loss = [&](const MlpParams& q) { return checks::probe_loss(trial_jets(q, trial), nullptr); };
      worst_grad = std::max(worst_grad, checks::directional_error(params, lg.gradient, loss, rng.next()));
    }
    report("derivative suite", worst_jet < 1e-5 && worst_grad < 1e-5,
           "worst jet error " + fmt(worst_jet) + ", worst parameter-gradient error " + fmt(worst_grad) +
               " over 100 + 100 cases (limit 1e-5)");
  });

  criterion("p=2 reduction", [] {
    int mismatches = 0, cases = 0;
    const Domain domains[] = {Domain::ball(2), Domain::unit_square(), Domain::ball(3)};
    for (const auto& domain : domains) {
      const auto batch = sample_interior(domain, 512, 3);
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto params = init_params(NetShape{domain.dim(), 32, 32}, seed);
        for (double e : {3.0, 9.87, 26.4, 49.3}) {
          const auto lin = assemble_loss(params, batch, LinearOperator{}, e, LossConfig{}, domain);
          const auto pl = assemble_loss(params, batch, PLaplaceOperator{2.0}, e, LossConfig{}, domain);
          ++cases;
          if (!(lin == pl)) ++mismatches;
        }
      }
    }
    report("p=2 reduction", mismatches == 0,
           std::to_string(cases - mismatches) + "/" + std::to_string(cases) + " loss breakdowns bit-identical");
  });

  criterion("p-Laplacian divergence consistency", [] {
    double worst = 0.0;
    SplitMix64 rng(5);
    for (double p : {1.5, 2.05, 2.2, 3.0}) {
      for (int c = 0; c < 25; ++c) {
        const int d = 2 + c % 2;
        Eigen::VectorXd x(d);
        do {
          for (int i = 0; i < d; ++i) x[i] = rng.uniform(-1.0, 1.0);
        } while (x.norm() < 0.1 || x.norm() > 1.0);
        worst = std::max(worst, checks::plaplace_fd_error(p, x));
      }
    }
    report("p-Laplacian divergence consistency", worst < 1e-4,
           "worst relative error " + fmt(worst) + " over 100 points with 0.1 <= |x| <= 1 (limit 1e-4)");
  });

  criterion("oracle self-checks", [] {
    const auto fd = fd_spectrum(Domain::unit_square(), ZeroPotential{}, 128, 4);
    const auto exact = rectangle_spectrum({1.0, 1.0}, 4);
    double fd_worst = 0.0;
    for (int k = 0; k < 4; ++k) {
      fd_worst = std::max(fd_worst, std::abs(fd.eigenvalues[k] - exact.eigenvalues[k]) / exact.eigenvalues[k]);
    }
    double bessel_worst = 0.0;
    for (int l = 0; l <= 12; ++l) {
      for (int k = 1; k <= 12; ++k) {
        const double nu = 0.5 * l;
        bessel_worst = std::max(bessel_worst, std::abs(bessel_j(nu, bessel_zero(nu, k))));
      }
    }
    const double listed[] = {5.7832, 14.6819, 26.3743, 30.4713};
    const auto disk = ball_spectrum(2, 1.0, 4);
    double disk_worst = 0.0;
    for (int k = 0; k < 4; ++k) disk_worst = std::max(disk_worst, std::abs(disk.eigenvalues[k] - listed[k]));
    report("oracle self-checks", fd_worst < 5e-3 && bessel_worst < 1e-9 && disk_worst < 2e-3,
           "fd square relative error " + fmt(fd_worst) + " (< 0.5%), bessel residual " + fmt(bessel_worst) +
               " (< 1e-9), disk list error " + fmt(disk_worst) + " (< 2e-3)");
  });

  // Scans.
  ScanRun disk;
  criterion("disk spectrum", [&] {
    disk = scan(work / "disk", R"({"scan": {"e_lo": 3, "e_hi": 35, "grid_count": 129}})");
    const double expected[] = {5.7832, 14.6819, 26.3743, 30.4713};
    bool pass = disk.estimates.size() == 4;
    std::string detail = std::to_string(disk.estimates.size()) + " estimates " + list(disk.estimates);
    if (pass) {
      for (int k = 0; k < 4; ++k) {
        const auto& e = disk.estimates[k];
        const double tol = e.grid_resolution + 2e-3;
        pass = pass && std::abs(e.e_hat - expected[k]) <= tol;
        detail += "; |" + fmt(e.e_hat) + " - " + fmt(expected[k]) + "| = " + fmt(std::abs(e.e_hat - expected[k])) +
                  " vs " + fmt(tol);
      }
    }
    std::ostringstream log, err;
    if (cmd_oracle(disk.config, disk.dir, log, err) == 0) {
      std::ostringstream table;
      const int v = cmd_validate(disk.config, disk.dir, table, err);
      detail += "; validate exit " + std::to_string(v);
    }
    report("disk spectrum", pass, detail);
  });

  criterion("upper-bound consistency", [&] {
    if (disk.estimates.empty()) throw std::runtime_error("no disk estimates");
    const auto spectrum = ball_spectrum(2, 1.0, 8);
    bool pass = true;
    std::string detail;
    for (const auto& e : disk.estimates) {
      const double bound = upper_bound_curve(spectrum, {e.e_hat}).points[0].bound;
      const double limit = e.grid_resolution * e.grid_resolution;
      pass = pass && bound <= limit;
      detail += (detail.empty() ? "" : "; ") + std::string("U(") + fmt(e.e_hat) + ") = " + fmt(bound) + " vs " + fmt(limit);
    }
    report("upper-bound consistency", pass, detail);
  });

  criterion("square window", [&] {
    const auto run = scan(work / "square",
                          R"({"domain": {"kind": "rectangle", "sides": [[0, 1], [0, 1]]},
                              "scan": {"e_lo": 44, "e_hi": 55, "grid_count": 45}})");
    const double target = 49.348;
    bool pass = run.estimates.size() == 1 &&
                std::abs(run.estimates[0].e_hat - target) <= run.estimates[0].grid_resolution;
    std::string detail = std::to_string(run.estimates.size()) + " estimates " + list(run.estimates);
    if (!run.estimates.empty()) detail += ", resolution " + fmt(run.estimates[0].grid_resolution);
    report("square window", pass, detail + " (target 49.348)");
  });

  auto ball_check = [&](const std::string& name, int d, double lo, double hi, double target) {
    criterion(name, [&] {
      const auto run = scan(work / name, R"({"domain": {"kind": "ball", "dim": )" + std::to_string(d) +
                                             R"(}, "scan": {"e_lo": )" + fmt(lo) + R"(, "e_hi": )" + fmt(hi) +
                                             R"(, "grid_count": 33}})");
      bool pass = run.estimates.size() == 1 &&
                  std::abs(run.estimates[0].e_hat - target) <= run.estimates[0].grid_resolution;
      std::string detail = std::to_string(run.estimates.size()) + " estimates " + list(run.estimates);
      if (!run.estimates.empty()) detail += ", resolution " + fmt(run.estimates[0].grid_resolution);
      report(name, pass, detail + " (target " + fmt(target) + ")");
    });
  };
  ball_check("3D ball", 3, 6.0, 14.0, std::numbers::pi * std::numbers::pi);
  if (const char* v = std::getenv("PINNEIG_ACCEPT_4D"); v && std::string(v) == "1") {
    ball_check("4D ball", 4, 10.0, 18.0, 14.6819);
  }

  criterion("p=2.05 continuity", [&] {
    const auto run = scan(work / "p205", R"({"operator": {"kind": "p_laplace", "p": 2.05},
                                             "scan": {"e_lo": 4, "e_hi": 8, "grid_count": 17}})");
    const bool pass = !run.estimates.empty() && std::abs(run.estimates[0].e_hat - 5.7832) <= 0.5;
    report("p=2.05 continuity", pass, "estimates " + list(run.estimates) + " (first within 0.5 of 5.7832)");
  });

  criterion("p=2.2 two minima", [&] {
    const auto run = scan(work / "p22", R"({"operator": {"kind": "p_laplace", "p": 2.2},
                                            "scan": {"e_lo": 4, "e_hi": 20, "grid_count": 65}})");
    const bool pass = run.estimates.size() >= 2 && run.estimates[0].e_hat < run.estimates[1].e_hat;
    report("p=2.2 two minima", pass,
           std::to_string(run.estimates.size()) + " minima below threshold " + list(run.estimates));
  });

  const std::string harmonic = R"({"operator": {"kind": "linear", "potential": {"kind": "harmonic", "omega": 1}},
                                   "scan": {"e_lo": 4, "e_hi": 10, "grid_count": 25}})";
  criterion("harmonic potential", [&] {
    const auto run = scan(work / "harmonic", harmonic);
    const auto fd = fd_spectrum(Domain::ball(2), HarmonicPotential{1.0}, 128, 1);
    const double spacing = 6.0 / 24.0;
    const bool pass = !run.estimates.empty() && std::abs(run.estimates[0].e_hat - fd.eigenvalues[0]) <= 3 * spacing;
    report("harmonic potential", pass,
           "estimates " + list(run.estimates) + ", fd reference " + fmt(fd.eigenvalues[0]) + " (within " +
               fmt(3 * spacing) + ")");
  });

  criterion("determinism", [&] {
    const auto again = scan(work / "harmonic_rerun", harmonic);
    bool same = true;
    for (const char* f : {kLossCurve, kEigenvalues}) {
      same = same && read_file(work / "harmonic" / f) == read_file(again.dir / f);
    }
    report("determinism", same, "loss_curve.csv and eigenvalues.json byte-identical across two runs of one config");
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
