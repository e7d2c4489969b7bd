#include "casemix/tree.hpp"

#include "casemix/csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace casemix::tree {

using nlohmann::json;

void TreeParams::validate() const {
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (min_split < 2 * min_leaf) throw std::invalid_argument("min_split must be >= 2 * min_leaf");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  if (!(cp >= 0.0)) throw std::invalid_argument("cp must be >= 0");
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::function<int(int)> walk = [&](int i) -> int {
    const auto& nd = nodes[i];
    return nd.is_leaf() ? 0 : 1 + std::max(walk(nd.left), walk(nd.right));
  };
  return walk(0);
}

int DecisionTree::leaf_count() const {
  if (nodes.empty()) return 0;
  std::function<int(int)> walk = [&](int i) -> int {
    const auto& nd = nodes[i];
    return nd.is_leaf() ? 1 : walk(nd.left) + walk(nd.right);
  };
  return walk(0);
}

namespace {

// Quadratic form c' L c of a class-count vector.
double quad(const Eigen::VectorXd& c, const Eigen::MatrixXd& L) { return c.dot(L * c); }

bool goes_left(const Node& nd, const FeatureInfo& info, double x, const std::vector<Node>& nodes) {
  if (std::isnan(x)) return nodes[nd.left].n >= nodes[nd.right].n;
  if (info.kind == FeatureKind::numeric) return x < nd.threshold;
  const int code = static_cast<int>(x);
  return std::binary_search(nd.left_levels.begin(), nd.left_levels.end(), code);
}

struct Scan {
  const Eigen::MatrixXd& L;
  int K;
  double n;
  double qP;
  double eps;
  const TreeParams& params;
  std::optional<Split> best;

  double gain(double qL, double nL, double qR, double nR) const { return qP / n - qL / nL - qR / nR; }

  void offer(double g, int feature, double threshold, std::vector<int> levels, int nL, int nR) {
    if (!(g > eps)) return;
    if (best && !(g > best->decrease + eps)) return;
    best = Split{feature, threshold, std::move(levels), g, nL, nR};
  }
};

void scan_numeric(Scan& s, const FeatureTable& data, int f, std::span<const int> labels,
                  std::span<const int> rows, const Eigen::VectorXd& cP) {
  std::vector<std::pair<double, int>> xs;
  xs.reserve(rows.size());
  for (int r : rows) xs.emplace_back(data.values(r, f), labels[r] - 1);
  std::stable_sort(xs.begin(), xs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (xs.front().first == xs.back().first) return;

  const Eigen::VectorXd LcP = s.L * cP;
  const Eigen::VectorXd LTcP = s.L.transpose() * cP;
  Eigen::VectorXd LcL = Eigen::VectorXd::Zero(s.K);
  Eigen::VectorXd LTcL = Eigen::VectorXd::Zero(s.K);
  double qL = 0.0, a = 0.0, b = 0.0;
  const int n = static_cast<int>(xs.size());
  for (int i = 0; i + 1 < n; ++i) {
    const int y = xs[i].second;
    qL += LcL(y) + LTcL(y) + s.L(y, y);
    a += LcP(y);
    b += LTcP(y);
    LcL += s.L.col(y);
    LTcL += s.L.row(y).transpose();
    const int nL = i + 1;
    const int nR = n - nL;
    if (nL < s.params.min_leaf) continue;
    if (nR < s.params.min_leaf) break;
    if (xs[i].first == xs[i + 1].first) continue;
    const double qR = std::max(0.0, s.qP - a - b + qL);
    double t = 0.5 * (xs[i].first + xs[i + 1].first);
    if (!(t > xs[i].first)) t = xs[i + 1].first;
    s.offer(s.gain(qL, nL, qR, nR), f, t, {}, nL, nR);
  }
}

void scan_categorical(Scan& s, const FeatureTable& data, int f, std::span<const int> labels,
                      std::span<const int> rows, const Eigen::VectorXd& cP) {
  std::map<int, Eigen::VectorXd> per_level;
  for (int r : rows) {
    const int code = static_cast<int>(data.values(r, f));
    auto it = per_level.find(code);
    if (it == per_level.end()) it = per_level.emplace(code, Eigen::VectorXd::Zero(s.K)).first;
    it->second(labels[r] - 1) += 1.0;
  }
  if (per_level.size() < 2) return;
  std::vector<int> codes;
  std::vector<Eigen::VectorXd> level_counts;
  for (auto& [code, c] : per_level) {
    codes.push_back(code);
    level_counts.push_back(c);
  }
  const int m = static_cast<int>(codes.size());

  auto evaluate = [&](const std::vector<int>& members) {
    Eigen::VectorXd cL = Eigen::VectorXd::Zero(s.K);
    std::vector<int> left;
    for (int j : members) {
      cL += level_counts[j];
      left.push_back(codes[j]);
    }
    const Eigen::VectorXd cR = cP - cL;
    const double nL = cL.sum(), nR = cR.sum();
    if (nL < s.params.min_leaf || nR < s.params.min_leaf) return;
    std::sort(left.begin(), left.end());
    s.offer(s.gain(quad(cL, s.L), nL, quad(cR, s.L), nR), f, 0.0, std::move(left), static_cast<int>(nL),
            static_cast<int>(nR));
  };

  if (m <= 10) {
    // The last present level always goes right, so each partition is seen once.
    const unsigned limit = 1u << (m - 1);
    std::vector<int> members;
    for (unsigned mask = 1; mask < limit; ++mask) {
      members.clear();
      for (int j = 0; j < m - 1; ++j) {
        if (mask & (1u << j)) members.push_back(j);
      }
      evaluate(members);
    }
    return;
  }
  // Many levels: each level alone against the rest, in mean-label-rank order.
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> mean_rank(m);
  for (int j = 0; j < m; ++j) {
    double sum = 0.0;
    for (int k = 0; k < s.K; ++k) sum += (k + 1) * level_counts[j](k);
    mean_rank[j] = sum / level_counts[j].sum();
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean_rank[a] < mean_rank[b]; });
  for (int j : order) evaluate({j});
}

Eigen::VectorXd class_counts(std::span<const int> labels, std::span<const int> rows, int K) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(K);
  for (int r : rows) c(labels[r] - 1) += 1.0;
  return c;
}

void fill_node_stats(Node& nd, const Eigen::VectorXd& c, const CostMatrix& loss) {
  nd.n = static_cast<int>(c.sum());
  nd.counts.resize(static_cast<std::size_t>(c.size()));
  for (Eigen::Index k = 0; k < c.size(); ++k) nd.counts[k] = static_cast<int>(c(k));
  nd.impurity = gini_loss_impurity(c, loss);
  const auto leaf = leaf_label(c, loss);
  nd.label = leaf.label;
  nd.expected_cost = leaf.expected_cost;
}

// Copies the subtree reachable from the root into a fresh preorder vector.
std::vector<Node> compact(const std::vector<Node>& nodes) {
  std::vector<Node> out;
  std::function<int(int)> copy = [&](int i) -> int {
    const int idx = static_cast<int>(out.size());
    out.push_back(nodes[i]);
    if (!nodes[i].is_leaf()) {
      const int l = copy(nodes[i].left);
      const int r = copy(nodes[i].right);
      out[idx].left = l;
      out[idx].right = r;
    }
    return idx;
  };
  if (!nodes.empty()) copy(0);
  return out;
}

void make_leaf(Node& nd) {
  nd.feature = -1;
  nd.threshold = 0.0;
  nd.left_levels.clear();
  nd.left = nd.right = -1;
  nd.decrease = 0.0;
}

Eigen::RowVectorXd remap_row(const DecisionTree& tree, const FeatureTable& table, Eigen::Index r,
                             const std::vector<int>& cols,
                             const std::vector<std::vector<int>>& level_map) {
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    double x = table.values(r, cols[c]);
    if (tree.schema[c].kind == FeatureKind::categorical && !std::isnan(x)) {
      const int code = static_cast<int>(x);
      x = (code >= 0 && code < static_cast<int>(level_map[c].size())) ? level_map[c][code] : -1;
    }
    row(static_cast<Eigen::Index>(c)) = x;
  }
  return row;
}

ExtraSchema as_extras(const FeatureSchema& schema) {
  ExtraSchema out;
  for (const auto& f : schema) out.push_back({f.name, f.kind});
  return out;
}

}  // namespace

std::optional<Split> best_split(const FeatureTable& data, std::span<const int> labels,
                                std::span<const int> rows, const TreeParams& params) {
  const int K = params.loss.k();
  if (rows.size() < static_cast<std::size_t>(std::max(params.min_split, 2))) return std::nullopt;
  const Eigen::VectorXd cP = class_counts(labels, rows, K);
  const double n = static_cast<double>(rows.size());
  const double qP = quad(cP, params.loss.entries());
  if (!(qP > 0.0)) return std::nullopt;
  Scan s{params.loss.entries(), K, n, qP, 1e-12 * qP / n, params, std::nullopt};
  for (int f = 0; f < static_cast<int>(data.cols()); ++f) {
    if (data.schema[f].kind == FeatureKind::numeric) {
      scan_numeric(s, data, f, labels, rows, cP);
    } else {
      scan_categorical(s, data, f, labels, rows, cP);
    }
  }
  return s.best;
}

DecisionTree build_tree(const FeatureTable& data, std::span<const int> labels, const TreeParams& params) {
  params.validate();
  const int K = params.loss.k();
  if (data.rows() == 0) throw std::invalid_argument("build_tree: empty data");
  if (static_cast<std::size_t>(data.rows()) != labels.size()) {
    throw std::invalid_argument("build_tree: labels not aligned with data rows");
  }
  if (static_cast<std::size_t>(data.cols()) != data.schema.size()) {
    throw std::invalid_argument("build_tree: schema does not match columns");
  }
  for (int y : labels) {
    if (y < 1 || y > K) throw std::invalid_argument("build_tree: label outside [1, K]");
  }
  if (!data.values.allFinite()) throw std::invalid_argument("build_tree: training data has missing values");

  DecisionTree tree;
  tree.params = params;
  tree.schema = data.schema;

  std::vector<int> all(static_cast<std::size_t>(data.rows()));
  std::iota(all.begin(), all.end(), 0);

  std::function<int(std::vector<int>&, int)> grow = [&](std::vector<int>& rows, int depth) -> int {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    fill_node_stats(tree.nodes[idx], class_counts(labels, rows, K), params.loss);
    if (depth >= params.max_depth || static_cast<int>(rows.size()) < params.min_split ||
        tree.nodes[idx].impurity <= 0.0) {
      return idx;
    }
    auto split = best_split(data, labels, rows, params);
    if (!split) return idx;

    const auto& info = data.schema[split->feature];
    std::vector<int> left, right;
    for (int r : rows) {
      const double x = data.values(r, split->feature);
      const bool is_left = info.kind == FeatureKind::numeric
                               ? x < split->threshold
                               : std::binary_search(split->left_levels.begin(), split->left_levels.end(),
                                                    static_cast<int>(x));
      (is_left ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    {
      Node& nd = tree.nodes[idx];
      nd.feature = split->feature;
      nd.threshold = split->threshold;
      nd.left_levels = split->left_levels;
      nd.decrease = split->decrease;
    }
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
  };
  grow(all, 0);
  return prune(tree, params.cp);
}

DecisionTree prune(const DecisionTree& tree, double cp) {
  if (!(cp >= 0.0)) throw std::invalid_argument("prune: cp must be >= 0");
  DecisionTree out = tree;
  out.params.cp = cp;
  auto& nodes = out.nodes;
  if (nodes.empty()) return out;
  if (std::isinf(cp)) {
    make_leaf(nodes[0]);
    nodes = compact(nodes);
    return out;
  }
  auto risk = [&](int i) { return nodes[i].n * nodes[i].expected_cost; };
  const double threshold = cp * risk(0);

  while (true) {
    // (subtree risk, leaves) per reachable node, computed bottom-up.
    std::vector<std::pair<double, int>> sub(nodes.size());
    std::function<void(int)> measure = [&](int i) {
      if (nodes[i].is_leaf()) {
        sub[i] = {risk(i), 1};
        return;
      }
      measure(nodes[i].left);
      measure(nodes[i].right);
      sub[i] = {sub[nodes[i].left].first + sub[nodes[i].right].first,
                sub[nodes[i].left].second + sub[nodes[i].right].second};
    };
    measure(0);

    int weakest = -1;
    double weakest_g = std::numeric_limits<double>::infinity();
    std::function<void(int)> visit = [&](int i) {
      if (nodes[i].is_leaf()) return;
      const double g = (risk(i) - sub[i].first) / (sub[i].second - 1);
      if (g < weakest_g) {
        weakest_g = g;
        weakest = i;
      }
      visit(nodes[i].left);
      visit(nodes[i].right);
    };
    visit(0);
    if (weakest < 0 || !(weakest_g < threshold)) break;
    make_leaf(nodes[weakest]);
  }
  nodes = compact(nodes);
  return out;
}

int predict(const DecisionTree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (tree.nodes.empty()) throw std::invalid_argument("predict: empty tree");
  if (row.size() != static_cast<Eigen::Index>(tree.schema.size())) {
    throw std::invalid_argument("predict: row length does not match tree schema");
  }
  int i = 0;
  while (!tree.nodes[i].is_leaf()) {
    const auto& nd = tree.nodes[i];
    i = goes_left(nd, tree.schema[nd.feature], row(nd.feature), tree.nodes) ? nd.left : nd.right;
  }
  return tree.nodes[i].label;
}

int predict(const DecisionTree& tree, const PatientRecord& record) {
  return predict(tree, encode_record(record, tree.schema, as_extras(tree.schema)));
}

std::vector<int> predict(const DecisionTree& tree, const FeatureTable& table) {
  std::vector<int> cols;
  std::vector<std::vector<int>> level_map(tree.schema.size());
  for (std::size_t c = 0; c < tree.schema.size(); ++c) {
    const auto& info = tree.schema[c];
    const int idx = table.index_of(info.name);
    if (idx < 0) throw std::invalid_argument("predict: table lacks feature '" + info.name + "'");
    if (table.schema[idx].kind != info.kind) {
      throw std::invalid_argument("predict: feature '" + info.name + "' has a different kind");
    }
    cols.push_back(idx);
    for (const auto& level : table.schema[idx].levels) level_map[c].push_back(info.level_code(level));
  }
  std::vector<int> out(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index r = 0; r < table.rows(); ++r) out[r] = predict(tree, remap_row(tree, table, r, cols, level_map));
  return out;
}

std::vector<std::pair<std::string, double>> variable_importance(const DecisionTree& tree) {
  std::vector<double> score(tree.schema.size(), 0.0);
  std::vector<bool> used(tree.schema.size(), false);
  for (const auto& nd : tree.nodes) {
    if (nd.is_leaf()) continue;
    score[nd.feature] += nd.decrease;
    used[nd.feature] = true;
  }
  std::vector<int> order;
  for (std::size_t f = 0; f < score.size(); ++f) {
    if (used[f]) order.push_back(static_cast<int>(f));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
  std::vector<std::pair<std::string, double>> out;
  for (int f : order) out.emplace_back(tree.schema[f].name, score[f]);
  return out;
}

std::vector<TreeRule> extract_rules(const DecisionTree& tree) {
  std::vector<TreeRule> rules;
  if (tree.nodes.empty()) return rules;
  std::vector<RuleCondition> path;
  std::function<void(int)> walk = [&](int i) {
    const auto& nd = tree.nodes[i];
    if (nd.is_leaf()) {
      rules.push_back({path, nd.label, nd.n, nd.expected_cost});
      return;
    }
    const auto& info = tree.schema[nd.feature];
    auto it = std::find_if(path.begin(), path.end(), [&](const auto& c) { return c.feature == nd.feature; });
    const bool fresh = it == path.end();
    RuleCondition base;
    if (fresh) {
      base.feature = nd.feature;
      base.name = info.name;
      base.kind = info.kind;
      if (info.kind == FeatureKind::categorical) {
        base.levels.resize(info.levels.size());
        std::iota(base.levels.begin(), base.levels.end(), 0);
      }
    } else {
      base = *it;
    }
    const std::size_t pos = fresh ? path.size() : static_cast<std::size_t>(it - path.begin());
    if (fresh) path.push_back(base);

    RuleCondition left = base, right = base;
    if (info.kind == FeatureKind::numeric) {
      left.upper = left.upper ? std::min(*left.upper, nd.threshold) : nd.threshold;
      right.lower = right.lower ? std::max(*right.lower, nd.threshold) : nd.threshold;
    } else {
      std::vector<int> l, r;
      for (int code : base.levels) {
        (std::binary_search(nd.left_levels.begin(), nd.left_levels.end(), code) ? l : r).push_back(code);
      }
      left.levels = std::move(l);
      right.levels = std::move(r);
    }
    path[pos] = left;
    walk(nd.left);
    path[pos] = right;
    walk(nd.right);
    if (fresh) {
      path.pop_back();
    } else {
      path[pos] = base;
    }
  };
  walk(0);
  return rules;
}

bool rule_matches(const TreeRule& rule, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (const auto& c : rule.conditions) {
    const double x = row(c.feature);
    if (c.kind == FeatureKind::numeric) {
      if (c.lower && !(x >= *c.lower)) return false;
      if (c.upper && !(x < *c.upper)) return false;
    } else {
      if (std::find(c.levels.begin(), c.levels.end(), static_cast<int>(x)) == c.levels.end()) return false;
    }
  }
  return true;
}

std::string format_condition(const RuleCondition& c, const FeatureSchema& schema) {
  std::ostringstream os;
  if (c.kind == FeatureKind::numeric) {
    if (c.lower && c.upper) {
      os << csv::format_double(*c.lower) << " <= " << c.name << " < " << csv::format_double(*c.upper);
    } else if (c.lower) {
      os << c.name << " >= " << csv::format_double(*c.lower);
    } else if (c.upper) {
      os << c.name << " < " << csv::format_double(*c.upper);
    }
  } else {
    os << c.name << " in {";
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
      if (i) os << ", ";
      os << schema[c.feature].levels[c.levels[i]];
    }
    os << '}';
  }
  return os.str();
}

namespace {

std::string join_conditions(const TreeRule& r, const FeatureSchema& schema) {
  if (r.conditions.empty()) return "true";
  std::string s;
  for (std::size_t i = 0; i < r.conditions.size(); ++i) {
    if (i) s += " and ";
    s += format_condition(r.conditions[i], schema);
  }
  return s;
}

}  // namespace

std::string rules_to_text(const std::vector<TreeRule>& rules, const FeatureSchema& schema) {
  std::ostringstream os;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    os << "rule " << (i + 1) << ": if " << join_conditions(r, schema) << " then class " << r.label
       << "  [n=" << r.support << ", expected cost " << csv::format_double(r.expected_cost) << "]\n";
  }
  return os.str();
}

std::string rules_to_csv(const std::vector<TreeRule>& rules, const FeatureSchema& schema) {
  std::ostringstream os;
  csv::write_row(os, {"rule", "conditions", "label", "support", "expected_cost"});
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    csv::write_row(os, {std::to_string(i + 1), join_conditions(r, schema), std::to_string(r.label),
                        std::to_string(r.support), csv::format_double(r.expected_cost)});
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

json params_to_json(const TreeParams& p) {
  json loss = json::array();
  for (int i = 0; i < p.loss.k(); ++i) {
    json row = json::array();
    for (int j = 0; j < p.loss.k(); ++j) row.push_back(p.loss(i, j));
    loss.push_back(std::move(row));
  }
  json j = {{"min_split", p.min_split}, {"min_leaf", p.min_leaf}, {"max_depth", p.max_depth}, {"loss", loss}};
  j["cp"] = std::isinf(p.cp) ? json(nullptr) : json(p.cp);
  return j;
}

TreeParams params_from_json(const json& j, int k) {
  TreeParams p;
  p.loss = linear_cost_matrix(k);
  if (j.contains("min_split")) p.min_split = j.at("min_split").get<int>();
  if (j.contains("min_leaf")) p.min_leaf = j.at("min_leaf").get<int>();
  if (j.contains("max_depth")) p.max_depth = j.at("max_depth").get<int>();
  if (j.contains("cp")) {
    p.cp = j.at("cp").is_null() ? std::numeric_limits<double>::infinity() : j.at("cp").get<double>();
  }
  if (j.contains("loss")) {
    const auto& rows = j.at("loss");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (rows[r].size() != rows.size()) throw std::invalid_argument("loss matrix must be square");
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rows[r][c].get<double>();
    }
    p.loss = CostMatrix(std::move(m));
  }
  p.validate();
  return p;
}

namespace {

json node_to_json(const DecisionTree& tree, int i) {
  const auto& nd = tree.nodes[i];
  json j;
  if (nd.is_leaf()) {
    j["label"] = nd.label;
  } else {
    const auto& info = tree.schema[nd.feature];
    j["feature"] = info.name;
    if (info.kind == FeatureKind::numeric) {
      j["threshold"] = nd.threshold;
    } else {
      json cats = json::array();
      for (int code : nd.left_levels) cats.push_back(info.levels[code]);
      j["categories"] = std::move(cats);
    }
  }
  j["n"] = nd.n;
  j["counts"] = nd.counts;
  j["impurity"] = nd.impurity;
  j["expected_cost"] = nd.expected_cost;
  if (!nd.is_leaf()) {
    j["decrease"] = nd.decrease;
    j["children"] = json::array({node_to_json(tree, nd.left), node_to_json(tree, nd.right)});
  }
  return j;
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw FormatError(path + ": missing '" + key + "'");
  return obj.at(key);
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& path) {
  try {
    return field(obj, key, path).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(path + "." + key + ": " + e.what());
  }
}

int node_from_json(DecisionTree& tree, const json& j, const std::string& path) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  Node nd;
  nd.n = get_as<int>(j, "n", path);
  nd.counts = get_as<std::vector<int>>(j, "counts", path);
  nd.impurity = get_as<double>(j, "impurity", path);
  nd.expected_cost = get_as<double>(j, "expected_cost", path);
  if (static_cast<int>(nd.counts.size()) != tree.k()) throw FormatError(path + ".counts: length != k");
  if (std::accumulate(nd.counts.begin(), nd.counts.end(), 0) != nd.n) {
    throw FormatError(path + ".counts: does not sum to n");
  }
  if (j.contains("label")) {
    nd.label = get_as<int>(j, "label", path);
    if (nd.label < 1 || nd.label > tree.k()) throw FormatError(path + ".label: out of range");
  } else {
    const auto name = get_as<std::string>(j, "feature", path);
    auto it = std::find_if(tree.schema.begin(), tree.schema.end(), [&](const auto& f) { return f.name == name; });
    if (it == tree.schema.end()) throw FormatError(path + ".feature: '" + name + "' not in schema");
    nd.feature = static_cast<int>(it - tree.schema.begin());
    if (it->kind == FeatureKind::numeric) {
      nd.threshold = get_as<double>(j, "threshold", path);
    } else {
      for (const auto& level : get_as<std::vector<std::string>>(j, "categories", path)) {
        const int code = it->level_code(level);
        if (code < 0) throw FormatError(path + ".categories: unknown level '" + level + "'");
        nd.left_levels.push_back(code);
      }
      std::sort(nd.left_levels.begin(), nd.left_levels.end());
    }
    nd.decrease = get_as<double>(j, "decrease", path);
    const auto leaf = leaf_label(Eigen::Map<const Eigen::VectorXi>(nd.counts.data(), tree.k()), tree.params.loss);
    nd.label = leaf.label;
    const auto& children = field(j, "children", path);
    if (!children.is_array() || children.size() != 2) throw FormatError(path + ".children: need exactly two");
    tree.nodes[idx] = nd;
    const int l = node_from_json(tree, children[0], path + ".children[0]");
    const int r = node_from_json(tree, children[1], path + ".children[1]");
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
  }
  tree.nodes[idx] = nd;
  return idx;
}

}  // namespace

json tree_to_json(const DecisionTree& tree) {
  json schema = json::array();
  for (const auto& f : tree.schema) {
    json jf = {{"name", f.name}, {"kind", f.kind == FeatureKind::numeric ? "numeric" : "categorical"}};
    if (f.kind == FeatureKind::categorical) jf["levels"] = f.levels;
    schema.push_back(std::move(jf));
  }
  return json{{"version", kFormatVersion},
              {"params", params_to_json(tree.params)},
              {"schema", std::move(schema)},
              {"root", node_to_json(tree, 0)}};
}

std::string serialize_tree(const DecisionTree& tree) { return tree_to_json(tree).dump(1) + "\n"; }

DecisionTree tree_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("model: document must be an object");
  const auto version = get_as<std::string>(j, "version", "model");
  if (version != kFormatVersion) {
    throw VersionError("model.version: unsupported '" + version + "', expected '" + kFormatVersion + "'");
  }
  DecisionTree tree;
  const auto& params = field(j, "params", "model");
  const auto& loss = field(params, "loss", "model.params");
  try {
    tree.params = params_from_json(params, static_cast<int>(loss.size()));
  } catch (const std::exception& e) {
    throw FormatError(std::string("model.params: ") + e.what());
  }
  const auto& schema = field(j, "schema", "model");
  if (!schema.is_array()) throw FormatError("model.schema: must be an array");
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const std::string path = "model.schema[" + std::to_string(i) + "]";
    FeatureInfo f;
    f.name = get_as<std::string>(schema[i], "name", path);
    const auto kind = get_as<std::string>(schema[i], "kind", path);
    if (kind == "numeric") {
      f.kind = FeatureKind::numeric;
    } else if (kind == "categorical") {
      f.kind = FeatureKind::categorical;
      f.levels = get_as<std::vector<std::string>>(schema[i], "levels", path);
    } else {
      throw FormatError(path + ".kind: unknown kind '" + kind + "'");
    }
    tree.schema.push_back(std::move(f));
  }
  node_from_json(tree, field(j, "root", "model"), "model.root");
  return tree;
}

DecisionTree deserialize_tree(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("model: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return tree_from_json(j);
}

}  // namespace casemix::tree
