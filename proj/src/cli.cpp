#include "pinneig/cli.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pinneig/snapshot.hpp"

namespace pinneig {
namespace {

using nlohmann::json;

json load_json(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing artifact " + path.string());
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const fs::path& file) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("malformed number '" + s + "' in " + file.string());
  return v;
}

// Removes a stale FAILED marker and echoes the resolved config.
void prepare(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  fs::remove(out / kFailedMarker);
  write_file_atomic(out / kResolvedConfig, resolved_config_json(config));
}

template <class F>
int guarded(const fs::path& out, std::ostream& err, F&& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    try {
      fs::create_directories(out);
      write_file_atomic(out / kFailedMarker, std::string(e.what()) + "\n");
    } catch (...) {
    }
    return 1;
  }
}

void write_curve(const fs::path& out, const LossCurve& curve) {
  json entries = json::array();
  for (const auto& e : curve.entries) {
    entries.push_back({{"E", e.e},
                       {"snapshot", std::string(kSnapshotDir) + "/" + e.params_ref + ".snap"},
                       {"sweep", e.from_backward ? "backward" : "forward"}});
  }
  write_json(out / kCurveIndex, {{"seed", curve.seed}, {"entries", entries}});
  write_file_atomic(out / kLossCurve, loss_curve_csv(curve));
}

void refine_and_write(const RunConfig& config, const fs::path& out, const LossCurve& curve, std::ostream& log) {
  const auto candidates = detect_minima(curve, config.settings.scan.threshold);
  log << candidates.size() << " candidate minima below threshold " << config.settings.scan.threshold << "\n";
  const auto estimates = refine_all(curve, candidates, config.op, config.domain, config.settings, config.seed);
  json list = json::array();
  for (const auto& est : estimates) {
    const std::string name = write_snapshot(out / kSnapshotDir, est.params, config.seed);
    list.push_back({{"E_hat", est.e_hat},
                    {"loss_at_min", est.loss_at_min},
                    {"grid_resolution", est.grid_resolution},
                    {"refinement_level", est.refinement_level},
                    {"bracketed", est.bracketed},
                    {"snapshot", std::string(kSnapshotDir) + "/" + name}});
    log << "E_hat = " << format_double(est.e_hat) << "  loss = " << est.loss_at_min
        << "  resolution = " << est.grid_resolution << (est.bracketed ? "" : "  (not bracketed)") << "\n";
  }
  write_json(out / kEigenvalues, {{"seed", config.seed}, {"estimates", list}});
}

std::string provenance_name(Provenance p) { return p == Provenance::closed_form ? "closed_form" : "finite_difference"; }

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string loss_curve_csv(const LossCurve& curve) {
  std::string s = "E,total,residual_term,penalty_term,norm_estimate,mu_used,steps_run,stop_reason\n";
  for (const auto& e : curve.entries) {
    const auto& b = e.breakdown;
    for (double v : {e.e, b.total, b.residual_term, b.penalty_term, b.norm_estimate, b.mu_used}) {
      s += format_double(v);
      s += ',';
    }
    s += std::to_string(e.steps_run) + "," + to_string(e.stop_reason) + "\n";
  }
  return s;
}

LossCurve read_curve(const fs::path& dir) {
  const json index = load_json(dir / kCurveIndex);
  const fs::path csv_path = dir / kLossCurve;
  if (!fs::exists(csv_path)) throw std::runtime_error("missing artifact " + csv_path.string());
  std::istringstream csv(read_file(csv_path));
  std::string line;
  std::getline(csv, line);
  LossCurve curve;
  curve.seed = index.at("seed").get<std::uint64_t>();
  const auto& entries = index.at("entries");
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 8 || row >= entries.size()) throw std::runtime_error("malformed " + csv_path.string());
    CurveEntry e;
    e.e = to_double(cells[0], csv_path);
    e.breakdown = {to_double(cells[1], csv_path), to_double(cells[2], csv_path), to_double(cells[3], csv_path),
                   to_double(cells[4], csv_path), to_double(cells[5], csv_path)};
    e.steps_run = static_cast<int>(to_double(cells[6], csv_path));
    e.stop_reason = stop_reason_from_string(cells[7]);
    const std::string snap = entries[row].at("snapshot").get<std::string>();
    e.params = read_snapshot(dir / snap).params;
    e.params_ref = fs::path(snap).stem().string();
    e.from_backward = entries[row].value("sweep", "forward") == "backward";
    curve.entries.push_back(std::move(e));
    ++row;
  }
  if (row != entries.size()) throw std::runtime_error(csv_path.string() + " and " + kCurveIndex + " disagree");
  return curve;
}

std::vector<StoredEstimate> read_estimates(const fs::path& dir) {
  const json j = load_json(dir / kEigenvalues);
  std::vector<StoredEstimate> out;
  for (const auto& e : j.at("estimates")) {
    out.push_back({e.at("E_hat").get<double>(), e.at("loss_at_min").get<double>(),
                   e.at("grid_resolution").get<double>(), e.at("refinement_level").get<int>(),
                   e.at("bracketed").get<bool>(), e.at("snapshot").get<std::string>()});
  }
  return out;
}

OracleSpectrum read_oracle(const fs::path& dir) {
  const json j = load_json(dir / kOracleSpectrum);
  OracleSpectrum s;
  s.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  s.multiplicities = j.at("multiplicities").get<std::vector<int>>();
  s.provenance = j.at("provenance").get<std::string>() == "closed_form" ? Provenance::closed_form
                                                                        : Provenance::finite_difference;
  s.grid_n = j.at("grid_n").get<int>();
  s.description = j.at("description").get<std::string>();
  return s;
}

OracleSpectrum oracle_for(const RunConfig& config) {
  Potential potential = ZeroPotential{};
  if (const auto* pl = std::get_if<PLaplaceOperator>(&config.op)) {
    if (pl->p != 2.0) throw std::runtime_error("no oracle for p ≠ 2");
  } else {
    potential = std::get<LinearOperator>(config.op).potential;
  }
  const int count = config.oracle.count;
  if (std::holds_alternative<ZeroPotential>(potential)) {
    if (const auto* b = std::get_if<Ball>(&config.domain.shape()); b && b->dim >= 2 && b->dim <= 4) {
      return ball_spectrum(b->dim, b->radius, count);
    }
    if (const auto* r = std::get_if<Rectangle>(&config.domain.shape())) {
      std::vector<double> lengths;
      for (const auto& side : r->sides) lengths.push_back(side.length());
      return rectangle_spectrum(lengths, count);
    }
  }
  if (config.domain.dim() != 2) {
    throw std::runtime_error("no oracle for this problem: finite differences cover planar domains only");
  }
  return fd_spectrum(config.domain, potential, config.oracle.fd_grid, count);
}

EigenfunctionGrid evaluate_eigenfunction(const MlpParams& params, const Domain& domain, int resolution) {
  const int d = domain.dim();
  const auto& box = domain.bounding_box();
  EigenfunctionGrid g;
  g.shape.assign(d, resolution);
  Eigen::Index n = 1;
  for (int i = 0; i < d; ++i) n *= resolution;
  g.nodes.resize(d, n);
  // First coordinate varies slowest.
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index rest = k;
    for (int i = d - 1; i >= 0; --i) {
      const Eigen::Index idx = rest % resolution;
      rest /= resolution;
      g.nodes(i, k) = idx == resolution - 1 ? box[i].hi : box[i].lo + box[i].length() * idx / (resolution - 1);
    }
  }
  g.values.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<Eigen::Index> inside;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd x = g.nodes.col(k);
    if (contains(domain, x)) inside.push_back(k);
  }
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < inside.size(); start += kChunk) {
    const std::size_t stop = std::min(inside.size(), start + kChunk);
    PointBatch batch;
    batch.points.resize(d, static_cast<Eigen::Index>(stop - start));
    for (std::size_t k = start; k < stop; ++k) batch.points.col(static_cast<Eigen::Index>(k - start)) = g.nodes.col(inside[k]);
    const JetBatch u = trial_jets(params, make_trial_batch(domain, std::move(batch)));
    for (std::size_t k = start; k < stop; ++k) g.values[inside[k]] = u.value[static_cast<Eigen::Index>(k - start)];
  }
  std::size_t peak = 0;
  for (std::size_t k = 1; k < g.values.size(); ++k) {
    if (std::abs(g.values[k]) > std::abs(g.values[peak])) peak = k;
  }
  if (g.values[peak] < 0.0) {
    g.sign_flipped = true;
    for (double& v : g.values) v = -v + 0.0;  // + 0.0 keeps zeros unsigned
  }
  double cell = 1.0;
  for (int i = 0; i < d; ++i) cell *= box[i].length() / (resolution - 1);
  double sum = 0.0;
  for (double v : g.values) sum += v * v;
  g.l2_norm = std::sqrt(sum * cell);
  return g;
}

std::string eigenfunction_csv(const EigenfunctionGrid& grid) {
  std::string s;
  const auto d = grid.nodes.rows();
  for (Eigen::Index i = 0; i < d; ++i) s += "x" + std::to_string(i) + ",";
  s += "u\n";
  for (Eigen::Index k = 0; k < grid.nodes.cols(); ++k) {
    for (Eigen::Index i = 0; i < d; ++i) {
      s += format_double(grid.nodes(i, k));
      s += ',';
    }
    s += format_double(grid.values[static_cast<std::size_t>(k)]);
    s += '\n';
  }
  return s;
}

std::vector<ValidationRow> compare_to_oracle(const std::vector<StoredEstimate>& estimates, const OracleSpectrum& oracle,
                                             double e_lo, double e_hi, double extra_tolerance) {
  std::vector<ValidationRow> rows;
  std::vector<bool> matched(oracle.eigenvalues.size(), false);
  for (const auto& est : estimates) {
    ValidationRow row;
    row.estimate = est.e_hat;
    row.tolerance = est.grid_resolution + extra_tolerance;
    std::size_t nearest = 0;
    for (std::size_t k = 1; k < oracle.eigenvalues.size(); ++k) {
      if (std::abs(oracle.eigenvalues[k] - est.e_hat) < std::abs(oracle.eigenvalues[nearest] - est.e_hat)) nearest = k;
    }
    row.oracle = oracle.eigenvalues.empty() ? std::numeric_limits<double>::quiet_NaN() : oracle.eigenvalues[nearest];
    row.pass = std::abs(row.oracle - row.estimate) <= row.tolerance;
    if (!row.pass) {
      row.note = "no reference value within tolerance";
    } else if (matched[nearest]) {
      row.pass = false;
      row.note = "duplicate estimate";
    } else {
      matched[nearest] = true;
    }
    if (!est.bracketed) row.note += row.note.empty() ? "not bracketed" : "; not bracketed";
    rows.push_back(row);
  }
  for (std::size_t k = 0; k < oracle.eigenvalues.size(); ++k) {
    const double e = oracle.eigenvalues[k];
    if (matched[k] || !(e > e_lo && e < e_hi)) continue;
    rows.push_back({e, std::numeric_limits<double>::quiet_NaN(), 0.0, false, "missed eigenvalue"});
  }
  return rows;
}

int cmd_scan(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err) {
  LossCurve partial;
  partial.seed = config.seed;
  const int status = guarded(out, err, [&] {
    prepare(config, out);
    const auto& sc = config.settings.scan;
    const auto grid = make_grid(sc.e_lo, sc.e_hi, sc.grid_count);
    const fs::path snaps = out / kSnapshotDir;
    run_scan(grid, config.op, config.domain, config.settings, config.seed, [&](std::size_t i, const CurveEntry& e) {
      write_snapshot(snaps, e.params, config.seed);
      if (i == partial.entries.size()) {
        partial.entries.push_back(e);
      } else {
        partial.entries.at(i) = e;
      }
      log << (e.from_backward ? "<- " : "-> ") << "E = " << format_double(e.e) << "  loss = " << e.breakdown.total
          << "  steps = " << e.steps_run << " " << to_string(e.stop_reason) << "\n"
          << std::flush;
    });
    write_curve(out, partial);
    refine_and_write(config, out, partial, log);
  });
  if (status != 0 && !partial.entries.empty() && !fs::exists(out / kLossCurve)) {
    try {
      write_curve(out, partial);
    } catch (...) {
    }
  }
  return status;
}

int cmd_refine(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err) {
  return guarded(out, err, [&] {
    const LossCurve curve = read_curve(out);
    prepare(config, out);
    refine_and_write(config, out, curve, log);
  });
}

int cmd_oracle(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err) {
  return guarded(out, err, [&] {
    const OracleSpectrum spectrum = oracle_for(config);
    prepare(config, out);
    const auto& sc = config.settings.scan;
    const auto bound = upper_bound_curve(spectrum, make_grid(sc.e_lo, sc.e_hi, sc.grid_count));
    write_json(out / kOracleSpectrum, {{"eigenvalues", spectrum.eigenvalues},
                                       {"multiplicities", spectrum.multiplicities},
                                       {"provenance", provenance_name(spectrum.provenance)},
                                       {"grid_n", spectrum.grid_n},
                                       {"description", spectrum.description},
                                       {"warnings", bound.warnings}});
    std::string csv = "E,bound\n";
    for (const auto& p : bound.points) csv += format_double(p.e) + "," + format_double(p.bound) + "\n";
    write_file_atomic(out / kUpperBound, csv);
    for (std::size_t k = 0; k < spectrum.eigenvalues.size(); ++k) {
      log << format_double(spectrum.eigenvalues[k]) << "  (multiplicity " << spectrum.multiplicities[k] << ")\n";
    }
    for (const auto& w : bound.warnings) log << "warning: " << w << "\n";
  });
}

int cmd_export_eigenfunction(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err) {
  return guarded(out, err, [&] {
    const auto estimates = read_estimates(out);
    if (estimates.empty()) log << "no estimates to export\n";
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const Snapshot snap = read_snapshot(out / estimates[k].snapshot);
      if (snap.params.shape().input_dim != config.domain.dim()) {
        throw std::runtime_error("snapshot " + estimates[k].snapshot + " does not match the domain dimension");
      }
      const auto grid = evaluate_eigenfunction(snap.params, config.domain, config.exports.resolution);
      const std::string stem = "eigenfunction_" + std::to_string(k + 1);
      write_file_atomic(out / (stem + ".csv"), eigenfunction_csv(grid));
      write_json(out / (stem + ".json"), {{"E_hat", estimates[k].e_hat},
                                          {"snapshot", estimates[k].snapshot},
                                          {"resolution", grid.shape},
                                          {"sign_convention", "node of maximum |u| is positive"},
                                          {"sign_flipped", grid.sign_flipped},
                                          {"l2_norm_estimate", grid.l2_norm}});
      log << stem << ".csv  E_hat = " << format_double(estimates[k].e_hat) << "\n";
    }
  });
}

int cmd_validate(const RunConfig& config, const fs::path& out, std::ostream& log, std::ostream& err) {
  bool all_pass = false;
  const int status = guarded(out, err, [&] {
    const auto estimates = read_estimates(out);
    const auto oracle = read_oracle(out);
    const auto& sc = config.settings.scan;
    const auto rows = compare_to_oracle(estimates, oracle, sc.e_lo, sc.e_hi, config.validate.extra_tolerance);
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %-14s %-12s %-12s %s\n", "oracle", "estimate", "|diff|", "tolerance",
                  "result");
    log << line;
    all_pass = true;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%-14.8f %-14.8f %-12.3e %-12.3e %s", r.oracle, r.estimate,
                    std::abs(r.oracle - r.estimate), r.tolerance, r.pass ? "PASS" : "FAIL");
      log << line << (r.note.empty() ? "" : "  " + r.note) << "\n";
      all_pass = all_pass && r.pass;
    }
  });
  if (status != 0) return status;
  return all_pass ? 0 : 1;
}

}  // namespace pinneig
