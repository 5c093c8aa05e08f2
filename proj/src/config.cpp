#include "pinneig/config.hpp"

#include <set>
#include <stdexcept>

#include "json.hpp"
#include "pinneig/errors.hpp"

namespace pinneig {
namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object()) throw ConfigError(label() + ": expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    if (!node_) return nullptr;
    auto it = node_->find(key);
    if (it == node_->end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, Eigen::Index& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
      out = v->get<Eigen::Index>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(key_path(key) + ": expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  std::vector<double> numbers(const std::string& key, const json& v) const {
    if (!v.is_array()) throw ConfigError(key_path(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(key_path(key) + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  void finish() const {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("unknown key '" + key_path(it.key()) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json* node_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
void check(const std::string& where, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

Domain parse_domain(const json* node) {
  Section s(node, "domain");
  std::string kind = "ball";
  s.get("kind", kind);
  Domain domain = Domain::ball(2);
  check("domain", [&] {
    if (kind == "ball") {
      int dim = 2;
      double radius = 1.0;
      s.get("dim", dim);
      s.get("radius", radius);
      domain = Domain::ball(dim, radius);
    } else if (kind == "rectangle") {
      std::vector<Interval> sides = {{0.0, 1.0}, {0.0, 1.0}};
      if (const json* v = s.find("sides")) {
        if (!v->is_array() || v->empty()) throw ConfigError("domain.sides: expected a nonempty array of [lo, hi]");
        sides.clear();
        for (const auto& side : *v) {
          const auto b = s.numbers("sides", side);
          if (b.size() != 2) throw ConfigError("domain.sides: each side must be [lo, hi]");
          sides.push_back({b[0], b[1]});
        }
      }
      domain = Domain::rectangle(sides);
    } else if (kind == "annulus") {
      double inner = 0.5, outer = 1.0;
      s.get("inner", inner);
      s.get("outer", outer);
      domain = Domain::annulus(inner, outer);
    } else if (kind == "triangle") {
      std::vector<Eigen::Vector2d> v = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
      if (const json* node_v = s.find("vertices")) {
        if (!node_v->is_array() || node_v->size() != 3) throw ConfigError("domain.vertices: expected three [x, y] pairs");
        for (std::size_t k = 0; k < 3; ++k) {
          const auto xy = s.numbers("vertices", (*node_v)[k]);
          if (xy.size() != 2) throw ConfigError("domain.vertices: expected three [x, y] pairs");
          v[k] = {xy[0], xy[1]};
        }
      }
      domain = Domain::triangle(v[0], v[1], v[2]);
    } else {
      throw ConfigError("domain.kind: expected ball, rectangle, annulus or triangle");
    }
  });
  s.finish();
  return domain;
}

OperatorSpec parse_operator(const json* node) {
  Section s(node, "operator");
  std::string kind = "linear";
  s.get("kind", kind);
  OperatorSpec op;
  if (kind == "linear") {
    LinearOperator lin;
    Section pot(s.find("potential"), "operator.potential");
    std::string pkind = "zero";
    pot.get("kind", pkind);
    if (pkind == "harmonic") {
      HarmonicPotential h;
      pot.get("omega", h.omega);
      lin.potential = h;
    } else if (pkind != "zero") {
      throw ConfigError("operator.potential.kind: expected zero or harmonic");
    }
    pot.finish();
    op = lin;
  } else if (kind == "p_laplace") {
    PLaplaceOperator pl;
    s.get("p", pl.p);
    s.get("grad_floor", pl.grad_floor);
    op = pl;
  } else {
    throw ConfigError("operator.kind: expected linear or p_laplace");
  }
  s.finish();
  check("operator", [&] { validate(op); });
  return op;
}

json operator_json(const OperatorSpec& op) {
  if (const auto* lin = std::get_if<LinearOperator>(&op)) {
    json pot = {{"kind", "zero"}};
    if (const auto* h = std::get_if<HarmonicPotential>(&lin->potential)) pot = {{"kind", "harmonic"}, {"omega", h->omega}};
    return {{"kind", "linear"}, {"potential", pot}};
  }
  const auto& pl = std::get<PLaplaceOperator>(op);
  return {{"kind", "p_laplace"}, {"p", pl.p}, {"grad_floor", pl.grad_floor}};
}

json domain_json(const Domain& domain) {
  return std::visit(
      [](const auto& shape) -> json {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, Ball>) {
          return {{"kind", "ball"}, {"dim", shape.dim}, {"radius", shape.radius}};
        } else if constexpr (std::is_same_v<T, Rectangle>) {
          json sides = json::array();
          for (const auto& side : shape.sides) sides.push_back({side.lo, side.hi});
          return {{"kind", "rectangle"}, {"sides", sides}};
        } else if constexpr (std::is_same_v<T, Annulus>) {
          return {{"kind", "annulus"}, {"inner", shape.inner}, {"outer", shape.outer}};
        } else {
          json v = json::array();
          for (const auto* p : {&shape.a, &shape.b, &shape.c}) v.push_back({(*p)[0], (*p)[1]});
          return {{"kind", "triangle"}, {"vertices", v}};
        }
      },
      domain.shape());
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  bool empty = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (!empty) {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
  }
  RunConfig c;
  Section top(empty ? nullptr : &root, "");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  c.domain = parse_domain(top.find("domain"));
  c.op = parse_operator(top.find("operator"));

  auto& net = c.settings.net;
  net.input_dim = c.domain.dim();
  {
    Section s(top.find("network"), "network");
    if (const json* h = s.find("hidden")) {
      if (!h->is_array() || h->size() != 2) throw ConfigError("network.hidden: expected two layer widths");
      for (const auto& w : *h) {
        if (!w.is_number_integer() || w.get<int>() < 1) throw ConfigError("network.hidden: widths must be positive integers");
      }
      net.hidden1 = (*h)[0].get<int>();
      net.hidden2 = (*h)[1].get<int>();
    }
    s.finish();
  }
  {
    auto& l = c.settings.loss;
    Section s(top.find("loss"), "loss");
    s.get("mu0", l.mu0);
    s.get("n_train", l.n_train);
    s.get("n_val", l.n_val);
    s.get("resample_each_step", l.resample_each_step);
    s.get("independent_validation", l.independent_validation);
    s.finish();
    if (!(l.mu0 > 0.0)) throw ConfigError("loss.mu0: must be positive");
    if (l.n_train < 1 || l.n_val < 1) throw ConfigError("loss.n_train, loss.n_val: must be at least 1");
  }
  {
    auto& t = c.settings.train;
    Section s(top.find("train"), "train");
    s.get("learning_rate", t.learning_rate);
    s.get("max_steps", t.max_steps);
    s.get("warm_max_steps", t.warm_max_steps);
    s.get("adam_beta1", t.adam_beta1);
    s.get("adam_beta2", t.adam_beta2);
    s.get("adam_eps", t.adam_eps);
    s.get("rel_improve_tol", t.rel_improve_tol);
    s.get("patience", t.patience);
    s.get("check_every", t.check_every);
    s.get("lr_decay", t.lr_decay);
    s.finish();
    check("train", [&] { t.validate(); });
  }
  {
    auto& sc = c.settings.scan;
    Section s(top.find("scan"), "scan");
    s.get("e_lo", sc.e_lo);
    s.get("e_hi", sc.e_hi);
    s.get("grid_count", sc.grid_count);
    s.get("threshold", sc.threshold);
    s.get("refine_depth", sc.refine_depth);
    s.get("refine_factor", sc.refine_factor);
    s.get("warm_start", sc.warm_start);
    s.get("backward_sweep", sc.backward_sweep);
    s.get("workers", sc.workers);
    s.finish();
    check("scan", [&] { sc.validate(); });
  }
  {
    Section s(top.find("oracle"), "oracle");
    s.get("count", c.oracle.count);
    s.get("fd_grid", c.oracle.fd_grid);
    s.finish();
    if (c.oracle.count < 1) throw ConfigError("oracle.count: must be at least 1");
    if (c.oracle.fd_grid < 32) throw ConfigError("oracle.fd_grid: must be at least 32");
  }
  {
    Section s(top.find("validate"), "validate");
    s.get("extra_tolerance", c.validate.extra_tolerance);
    s.finish();
    if (!(c.validate.extra_tolerance >= 0.0)) throw ConfigError("validate.extra_tolerance: must be non-negative");
  }
  {
    Section s(top.find("export"), "export");
    s.get("resolution", c.exports.resolution);
    s.finish();
    if (c.exports.resolution < 2) throw ConfigError("export.resolution: must be at least 2");
  }
  top.finish();
  return c;
}

std::string resolved_config_json(const RunConfig& c) {
  const auto& l = c.settings.loss;
  const auto& t = c.settings.train;
  const auto& sc = c.settings.scan;
  json j;
  j["seed"] = c.seed;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  j["domain"] = domain_json(c.domain);
  j["operator"] = operator_json(c.op);
  j["network"] = {{"hidden", {c.settings.net.hidden1, c.settings.net.hidden2}}};
  j["loss"] = {{"mu0", l.mu0},
               {"n_train", l.n_train},
               {"n_val", l.n_val},
               {"resample_each_step", l.resample_each_step},
               {"independent_validation", l.independent_validation}};
  j["train"] = {{"learning_rate", t.learning_rate}, {"max_steps", t.max_steps},
                {"warm_max_steps", t.warm_max_steps}, {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},   {"adam_eps", t.adam_eps},
                {"rel_improve_tol", t.rel_improve_tol}, {"patience", t.patience},
                {"check_every", t.check_every}, {"lr_decay", t.lr_decay}};
  j["scan"] = {{"e_lo", sc.e_lo},         {"e_hi", sc.e_hi},
               {"grid_count", sc.grid_count}, {"threshold", sc.threshold},
               {"refine_depth", sc.refine_depth}, {"refine_factor", sc.refine_factor},
               {"warm_start", sc.warm_start},  {"backward_sweep", sc.backward_sweep},
               {"workers", sc.workers}};
  j["oracle"] = {{"count", c.oracle.count}, {"fd_grid", c.oracle.fd_grid}};
  j["validate"] = {{"extra_tolerance", c.validate.extra_tolerance}};
  j["export"] = {{"resolution", c.exports.resolution}};
  return j.dump(2) + "\n";
}

}  // namespace pinneig
