#include "config.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace dissnet::cli {

using nlohmann::json;

namespace {

// Iterator over the config text that counts the lines it has consumed.
struct LineCountingIterator {
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const std::string* text = nullptr;
  std::size_t pos = 0;
  int* line = nullptr;
  char* last = nullptr;

  reference operator*() const { return (*text)[pos]; }
  LineCountingIterator& operator++() {
    *last = (*text)[pos];
    if (*last == '\n') ++*line;
    ++pos;
    return *this;
  }
  LineCountingIterator operator++(int) {
    LineCountingIterator t = *this;
    ++*this;
    return t;
  }
  bool operator==(const LineCountingIterator& o) const { return pos == o.pos; }
  bool operator!=(const LineCountingIterator& o) const { return pos != o.pos; }
};

// Records the line of every value by JSON pointer.
class LineMapper : public nlohmann::json_sax<json> {
 public:
  LineMapper(const int* line, const char* last) : line_(line), last_(last) {}

  std::map<std::string, int> lines;

  bool null() override { return value(false); }
  bool boolean(bool) override { return value(false); }
  bool number_integer(number_integer_t) override { return value(true); }
  bool number_unsigned(number_unsigned_t) override { return value(true); }
  bool number_float(number_float_t, const string_t&) override { return value(true); }
  bool string(string_t&) override { return value(false); }
  bool binary(binary_t&) override { return value(false); }
  bool start_object(std::size_t) override {
    value(false);
    stack_.push_back({false, 0, {}, current_});
    return true;
  }
  bool key(string_t& k) override {
    stack_.back().key = k;
    return true;
  }
  bool end_object() override { return pop(); }
  bool start_array(std::size_t) override {
    value(false);
    stack_.push_back({true, 0, {}, current_});
    return true;
  }
  bool end_array() override { return pop(); }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override {
    return false;
  }

 private:
  struct Frame {
    bool array;
    int index;
    std::string key;
    std::string path;
  };

  bool value(bool lookahead) {
    std::string path;
    if (!stack_.empty()) {
      Frame& f = stack_.back();
      path = f.path + "/" + (f.array ? std::to_string(f.index++) : escape(f.key));
    }
    current_ = path;
    // Numbers are terminated by a lookahead character that may be a newline.
    lines[path] = *line_ - (lookahead && *last_ == '\n' ? 1 : 0);
    return true;
  }
  bool pop() {
    stack_.pop_back();
    return true;
  }
  static std::string escape(const std::string& k) {
    std::string out;
    for (char c : k) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  const int* line_;
  const char* last_;
  std::vector<Frame> stack_;
  std::string current_;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, int> lines)
      : source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    std::string p = path;
    while (!p.empty() && !lines_.count(p)) p = p.substr(0, p.rfind('/'));
    const int line = lines_.count(p) ? lines_.at(p) : 1;
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + (path.empty() ? "/" : path) + ": " + msg);
  }

  const json& field(const json& obj, const std::string& path, const std::string& key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, "missing field '" + key + "'");
    return *it;
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  int integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  std::string text(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  DenseMatrix matrix(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected a matrix (array of rows)");
    const int rows = static_cast<int>(v.size());
    int cols = -1;
    for (int r = 0; r < rows; ++r) {
      const std::string rp = path + "/" + std::to_string(r);
      if (!v[r].is_array()) fail(rp, "expected a row array");
      if (cols < 0) cols = static_cast<int>(v[r].size());
      if (static_cast<int>(v[r].size()) != cols) fail(rp, "ragged matrix row");
    }
    DenseMatrix m(rows, std::max(cols, 0));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) m(r, c) = number(v[r][c], path + "/" + std::to_string(r) + "/" + std::to_string(c));
    }
    return m;
  }

  std::vector<double> vector(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], path + "/" + std::to_string(k)));
    return out;
  }

  SupplyMatrix supply(const json& v, const std::string& path, int q, int m) const {
    const std::string kind = text(field(v, path, "kind"), path + "/kind");
    auto num = [&](const char* k) { return number(field(v, path, k), path + "/" + k); };
    DissipativityKind dk;
    if (kind == "passive") {
      dk = Passive{};
    } else if (kind == "strictly_passive" || kind == "ifp_ofp") {
      dk = StrictlyPassive{num("nu"), num("rho")};
    } else if (kind == "l2gain") {
      dk = L2Gain{num("gamma")};
    } else if (kind == "general") {
      const DenseMatrix x = matrix(field(v, path, "x"), path + "/x");
      if (x.rows() != q + m || x.cols() != q + m) fail(path + "/x", "X must be (q+m) x (q+m)");
      dk = General{SupplyMatrix::from_full(x, q)};
    } else {
      fail(path + "/kind", "unknown kind '" + kind + "' (passive, strictly_passive, l2gain, general)");
    }
    SupplyMatrix x;
    try {
      x = supply_from_kind(dk, q, m);
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
    if (v.contains("ifp_shift")) {
      try {
        x = shift_ifp(x, number(v["ifp_shift"], path + "/ifp_shift"));
      } catch (const std::exception& e) {
        fail(path + "/ifp_shift", e.what());
      }
    }
    return x;
  }

  std::vector<SubsystemProfile> profiles(const json& v, const std::string& path) const {
    if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of subsystems");
    std::vector<SubsystemProfile> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string sp = path + "/" + std::to_string(i);
      const json& s = v[i];
      if (!s.is_object()) fail(sp, "expected an object");
      SubsystemProfile pr;
      pr.id = static_cast<int>(i);
      pr.input_dim = s.contains("input_dim") ? integer(s["input_dim"], sp + "/input_dim") : 1;
      pr.output_dim = s.contains("output_dim") ? integer(s["output_dim"], sp + "/output_dim") : 1;
      if (pr.input_dim < 0 || pr.output_dim < 0) fail(sp, "port dimensions must be non-negative");
      pr.certificate = supply(s, sp, pr.input_dim, pr.output_dim);
      out.push_back(pr);
    }
    return out;
  }

  FirstOrderDelaySISO siso(const json& v, const std::string& path) const {
    FirstOrderDelaySISO s;
    s.a = number(field(v, path, "a"), path + "/a");
    s.b = number(field(v, path, "b"), path + "/b");
    s.c = number(field(v, path, "c"), path + "/c");
    s.d = v.contains("d") ? number(v["d"], path + "/d") : 0.0;
    if (s.d < 0) fail(path + "/d", "delay must be non-negative");
    return s;
  }

 private:
  std::string source_;
  std::map<std::string, int> lines_;
};

}  // namespace

Objective parse_objective(const std::string& name) {
  if (name == "feasible") return Objective::Feasible;
  if (name == "max-passivity") return Objective::MaxPassivity;
  if (name == "min-l2gain") return Objective::MinL2Gain;
  if (name == "soft-topology-cost") return Objective::SoftTopologyCost;
  throw ConfigError("unknown objective '" + name + "'");
}

TopologyMode parse_topology_mode(const std::string& name) {
  if (name == "hard") return TopologyMode::Hard;
  if (name == "soft") return TopologyMode::Soft;
  if (name == "both") return TopologyMode::Both;
  throw ConfigError("unknown topology mode '" + name + "'");
}

Config parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t k = 0; k < std::min(e.byte, text.size()); ++k) line += text[k] == '\n';
    throw ConfigError(source + ":" + std::to_string(line) + ": JSON syntax error: " + e.what());
  }
  int line = 1;
  char last = 0;
  LineMapper mapper(&line, &last);
  LineCountingIterator first{&text, 0, &line, &last};
  LineCountingIterator end{&text, text.size(), &line, &last};
  json::sax_parse(first, end, &mapper);
  const Reader rd(source, mapper.lines);

  if (!doc.is_object()) rd.fail("", "config must be a JSON object");
  const int version = rd.integer(rd.field(doc, "", "schema_version"), "/schema_version");
  if (version != 1) rd.fail("/schema_version", "unsupported schema_version " + std::to_string(version));

  Config cfg;
  NSCProblem& p = cfg.problem;
  p.variant = rd.integer(rd.field(doc, "", "variant"), "/variant");
  if (p.variant < 1 || p.variant > 4) rd.fail("/variant", "variant must be 1..4");
  p.subsystems = rd.profiles(rd.field(doc, "", "subsystems"), "/subsystems");
  if (p.has_plants()) {
    p.plants = rd.profiles(rd.field(doc, "", "plants"), "/plants");
  } else if (doc.contains("plants")) {
    rd.fail("/plants", "plants only apply to variants 3 and 4");
  }
  if (p.has_exogenous()) {
    auto split = [&](const char* key) {
      const std::string path = std::string("/") + key;
      std::vector<int> out;
      if (!doc.contains(key)) return std::vector<int>(p.size(), 1);
      for (double v : rd.vector(doc[key], path)) out.push_back(static_cast<int>(v));
      return out;
    };
    p.w_split = split("w_split");
    p.z_split = split("z_split");
    int r = 0, l = 0;
    for (int v : p.w_split) r += v;
    for (int v : p.z_split) l += v;
    if (doc.contains("y")) p.global_spec = rd.supply(doc["y"], "/y", r, l);
  }
  if (doc.contains("topology")) {
    const json& t = doc["topology"];
    Topology topo;
    topo.adjacency = rd.matrix(rd.field(t, "/topology", "adjacency"), "/topology/adjacency");
    topo.cost = t.contains("cost") ? rd.matrix(t["cost"], "/topology/cost")
                                   : DenseMatrix::Zero(topo.adjacency.rows(), topo.adjacency.cols());
    if (t.contains("mode")) {
      try {
        topo.mode = parse_topology_mode(rd.text(t["mode"], "/topology/mode"));
      } catch (const ConfigError& e) {
        rd.fail("/topology/mode", e.what());
      }
    }
    p.topology = topo;
  }
  const ValidationReport rep = validate(p);
  if (!rep.ok) rd.fail("", rep.errors.front());

  auto blocks = [&](const json& obj, const std::string& path) {
    if (!obj.is_object()) rd.fail(path, "expected an object of named blocks");
    std::map<MBlock, DenseMatrix> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const auto b = block_from_name(it.key());
      const std::string bp = path + "/" + it.key();
      if (!b) rd.fail(bp, "unknown block name");
      if (!p.has_block(*b)) rd.fail(bp, "block not present in variant " + std::to_string(p.variant));
      out[*b] = rd.matrix(it.value(), bp);
    }
    return out;
  };
  if (doc.contains("m")) {
    const auto vals = blocks(doc["m"], "/m");
    for (MBlock b : kAllBlocks) {
      if (p.has_block(b) && !vals.count(b)) rd.fail("/m", std::string("missing block '") + block_name(b) + "'");
    }
    try {
      cfg.m = make_interconnection(p, vals);
    } catch (const std::exception& e) {
      rd.fail("/m", e.what());
    }
  }
  if (doc.contains("fixed")) cfg.fixed = blocks(doc["fixed"], "/fixed");
  if (doc.contains("template")) {
    cfg.structure = rd.text(doc["template"], "/template");
    try {
      (void)template_mask(cfg.structure, p);
    } catch (const std::exception& e) {
      rd.fail("/template", e.what());
    }
  }
  if (doc.contains("objective")) {
    try {
      cfg.objective = parse_objective(rd.text(doc["objective"], "/objective"));
    } catch (const ConfigError& e) {
      rd.fail("/objective", e.what());
    }
  }
  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    if (!s.is_object()) rd.fail("/solver", "expected an object");
    if (s.contains("margin")) cfg.margin = rd.number(s["margin"], "/solver/margin");
    if (s.contains("p_min")) cfg.p_min = rd.number(s["p_min"], "/solver/p_min");
    if (s.contains("p_max")) cfg.p_max = rd.number(s["p_max"], "/solver/p_max");
    if (s.contains("alpha")) cfg.alpha = rd.number(s["alpha"], "/solver/alpha");
    if (s.contains("c1")) cfg.c1 = rd.number(s["c1"], "/solver/c1");
    if (s.contains("c2")) cfg.c2 = rd.number(s["c2"], "/solver/c2");
  }
  if (doc.contains("sim")) {
    const json& s = doc["sim"];
    const std::string sp = "/sim";
    if (!s.is_object()) rd.fail(sp, "expected an object");
    SimConfig sim;
    if (s.contains("dt")) sim.dt = rd.number(s["dt"], sp + "/dt");
    if (s.contains("horizon")) sim.horizon = rd.number(s["horizon"], sp + "/horizon");
    auto systems = [&](const char* key, int expect) {
      std::vector<FirstOrderDelaySISO> out;
      const std::string path = sp + "/" + key;
      const json& arr = rd.field(s, sp, key);
      if (!arr.is_array()) rd.fail(path, "expected an array");
      if (static_cast<int>(arr.size()) != expect) rd.fail(path, "expected " + std::to_string(expect) + " entries");
      for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(rd.siso(arr[i], path + "/" + std::to_string(i)));
      return out;
    };
    sim.controllers = systems("controllers", p.size());
    if (p.has_plants()) sim.plants = systems("plants", p.size());
    if (s.contains("k_sys")) sim.k_sys = rd.number(s["k_sys"], sp + "/k_sys");
    if (s.contains("excitation")) {
      const json& e = s["excitation"];
      const std::string ep = sp + "/excitation";
      if (e.contains("start")) sim.excitation.start = rd.number(e["start"], ep + "/start");
      if (e.contains("width")) sim.excitation.width = rd.number(e["width"], ep + "/width");
      if (e.contains("amplitude")) sim.excitation.amplitude = rd.number(e["amplitude"], ep + "/amplitude");
    }
    cfg.sim = sim;
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace dissnet::cli
