#pragma once

// pufmodel v1 text format.
//
//   pufmodel v1 kind=<lr|rf|nn> dim=<d> classes=<K> labels=<binary|index>
//   lr: "weights <d+1 reals>" per output row (bias last)
//   nn: "matrix W1 <rows> <cols>" + rows lines, "vector b1 <n>" + 1 line, same for W2/b2
//   rf: "forest <T>", then per tree "tree <nodes>" and nodes in pre-order:
//       "node <feat> <thresh> <left> <right>" or "leaf <value>"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pufsec/error.hpp"
#include "pufsec/learner.hpp"
#include "pufsec/text.hpp"

namespace pufsec {

namespace detail {

inline void write_reals(std::ostream& out, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << text::format_real(v[i]);
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : lines_(text::read_lines(in)) {}

  bool done() const { return pos_ >= lines_.size(); }
  std::size_t lineno() const { return pos_; }

  std::vector<std::string_view> next(std::string_view expect_tag = {}) {
    if (done()) throw ParseError(pos_ + 1, "unexpected end of model file");
    const auto tokens = text::split(lines_[pos_++], ' ');
    if (!expect_tag.empty() && tokens[0] != expect_tag)
      throw ParseError(pos_, "expected '" + std::string(expect_tag) + "'");
    return tokens;
  }

  std::vector<double> reals(std::size_t expected) {
    const auto tokens = next();
    if (tokens.size() != expected)
      throw ParseError(pos_, "expected " + std::to_string(expected) + " values, got " +
                                 std::to_string(tokens.size()));
    std::vector<double> out;
    for (auto t : tokens) out.push_back(text::parse_or_throw<double>(t, pos_, "real"));
    return out;
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void write_model(std::ostream& out, const Learner& learner) {
  out << "pufmodel v1 kind=" << learner_name(learner.kind()) << " dim=" << learner.dim()
      << " classes=" << learner.classes() << " labels=" << (learner.binary() ? "binary" : "index")
      << '\n';
  if (const auto* lr = std::get_if<LogisticModel>(&learner.model())) {
    const std::size_t width = lr->dim() + 1;
    const auto p = lr->params();
    for (std::size_t r = 0; r < LogisticModel::rows(lr->classes()); ++r) {
      out << "weights ";
      detail::write_reals(out, p.subspan(r * width, width));
    }
  } else if (const auto* nn = std::get_if<MlpModel>(&learner.model())) {
    auto matrix = [&](const char* name, std::span<const double> m, std::size_t rows, std::size_t cols) {
      out << "matrix " << name << ' ' << rows << ' ' << cols << '\n';
      for (std::size_t r = 0; r < rows; ++r) detail::write_reals(out, m.subspan(r * cols, cols));
    };
    auto vec = [&](const char* name, std::span<const double> v) {
      out << "vector " << name << ' ' << v.size() << '\n';
      detail::write_reals(out, v);
    };
    matrix("W1", nn->w1(), nn->hidden(), nn->dim());
    vec("b1", nn->b1());
    matrix("W2", nn->w2(), nn->outputs(), nn->hidden());
    vec("b2", nn->b2());
  } else {
    const auto& rf = std::get<ForestModel>(learner.model());
    out << "forest " << rf.trees().size() << '\n';
    for (const auto& tree : rf.trees()) {
      out << "tree " << tree.nodes.size() << '\n';
      for (const auto& n : tree.nodes) {
        if (n.is_leaf())
          out << "leaf " << text::format_real(n.value) << '\n';
        else
          out << "node " << n.feature << ' ' << text::format_real(n.threshold) << ' ' << n.left << ' '
              << n.right << '\n';
      }
    }
  }
}

inline std::string model_to_string(const Learner& learner) {
  std::ostringstream s;
  write_model(s, learner);
  return s.str();
}

inline Learner read_model(std::istream& in) {
  detail::LineReader r(in);
  const auto header = r.next("pufmodel");
  if (header.size() < 2 || header[1] != "v1") throw ParseError(1, "expected 'pufmodel v1' header");
  const auto f = text::header_fields(header, 2, 1);
  LearnerKind kind;
  try {
    kind = parse_learner_kind(text::require_field(f, "kind", 1));
  } catch (const InvalidArgument& e) {
    throw ParseError(1, e.what());
  }
  const auto dim = text::parse_or_throw<std::size_t>(text::require_field(f, "dim", 1), 1, "dim");
  int classes = 2;
  if (auto it = f.find("classes"); it != f.end()) classes = text::parse_or_throw<int>(it->second, 1, "classes");
  bool binary = true;
  if (auto it = f.find("labels"); it != f.end()) binary = it->second == "binary";
  if (classes < 2 || dim == 0) throw ParseError(1, "invalid dim or classes");

  Learner::Model model;
  if (kind == LearnerKind::LR) {
    std::vector<double> params;
    for (std::size_t row = 0; row < LogisticModel::rows(classes); ++row) {
      auto tokens = r.next("weights");
      if (tokens.size() != dim + 2) throw ParseError(r.lineno(), "weights line must hold dim + 1 values");
      for (std::size_t i = 1; i < tokens.size(); ++i)
        params.push_back(text::parse_or_throw<double>(tokens[i], r.lineno(), "weight"));
    }
    model = LogisticModel(dim, classes, std::move(params));
  } else if (kind == LearnerKind::NN) {
    auto shape = [&](std::string_view tag, std::string_view name, std::size_t expect) {
      const auto t = r.next(tag);
      if (t.size() < 3 || t[1] != name) throw ParseError(r.lineno(), "expected block " + std::string(name));
      const auto a = text::parse_or_throw<std::size_t>(t[2], r.lineno(), "size");
      if (tag == "matrix") {
        if (t.size() != 4) throw ParseError(r.lineno(), "matrix needs rows and cols");
        const auto b = text::parse_or_throw<std::size_t>(t[3], r.lineno(), "size");
        if (b != expect) throw ParseError(r.lineno(), "matrix " + std::string(name) + " has wrong width");
        return std::pair{a, b};
      }
      if (expect != 0 && a != expect) throw ParseError(r.lineno(), "vector " + std::string(name) + " has wrong size");
      return std::pair{a, std::size_t{1}};
    };
    const auto [hidden, d1] = shape("matrix", "W1", dim);
    if (hidden == 0) throw ParseError(r.lineno(), "empty hidden layer");
    MlpModel nn(dim, hidden, classes);
    auto p = nn.params();
    std::size_t at = 0;
    auto fill_rows = [&](std::size_t rows, std::size_t cols) {
      for (std::size_t i = 0; i < rows; ++i)
        for (double v : r.reals(cols)) p[at++] = v;
    };
    fill_rows(hidden, d1);
    shape("vector", "b1", hidden);
    fill_rows(1, hidden);
    const auto [outs, hc] = shape("matrix", "W2", hidden);
    if (outs != nn.outputs()) throw ParseError(r.lineno(), "W2 row count does not match classes");
    fill_rows(outs, hc);
    shape("vector", "b2", outs);
    fill_rows(1, outs);
    model = std::move(nn);
  } else {
    const auto head = r.next("forest");
    if (head.size() != 2) throw ParseError(r.lineno(), "expected 'forest <T>'");
    const auto count = text::parse_or_throw<std::size_t>(head[1], r.lineno(), "tree count");
    std::vector<DecisionTree> trees(count);
    for (auto& tree : trees) {
      const auto th = r.next("tree");
      if (th.size() != 2) throw ParseError(r.lineno(), "expected 'tree <nodes>'");
      const auto nodes = text::parse_or_throw<std::size_t>(th[1], r.lineno(), "node count");
      for (std::size_t i = 0; i < nodes; ++i) {
        const auto t = r.next();
        TreeNode node;
        if (t[0] == "leaf" && t.size() == 2) {
          node.value = text::parse_or_throw<double>(t[1], r.lineno(), "leaf value");
        } else if (t[0] == "node" && t.size() == 5) {
          node.feature = text::parse_or_throw<int>(t[1], r.lineno(), "feature");
          node.threshold = text::parse_or_throw<double>(t[2], r.lineno(), "threshold");
          node.left = text::parse_or_throw<int>(t[3], r.lineno(), "child");
          node.right = text::parse_or_throw<int>(t[4], r.lineno(), "child");
          if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= dim ||
              node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
              static_cast<std::size_t>(node.left) >= nodes || static_cast<std::size_t>(node.right) >= nodes)
            throw ParseError(r.lineno(), "node references are out of range");
        } else {
          throw ParseError(r.lineno(), "expected 'node ...' or 'leaf <value>'");
        }
        tree.nodes.push_back(node);
      }
    }
    model = ForestModel(dim, classes, std::move(trees));
  }
  if (!r.done()) throw ParseError(r.lineno() + 1, "trailing content after model");
  return Learner(std::move(model), binary);
}

inline Learner model_from_string(const std::string& s) {
  std::istringstream in(s);
  return read_model(in);
}

}  // namespace pufsec
