#include "random_stencil.hpp"

#include "gts/analysis.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace gts::testing {

namespace {

struct IntervalPattern {
  std::vector<std::pair<std::string, std::string>> bounds; ///< ascending
  long k_min;
};

const std::vector<IntervalPattern> &interval_patterns() {
  static const std::vector<IntervalPattern> patterns = {
      {{{"0", "None"}}, 1},
      {{{"0", "1"}, {"1", "None"}}, 1},
      {{{"0", "-1"}, {"-1", "None"}}, 1},
      {{{"0", "2"}, {"2", "None"}}, 2},
      {{{"0", "1"}, {"1", "-1"}, {"-1", "None"}}, 2},
      {{{"0", "2"}, {"2", "-2"}, {"-2", "None"}}, 4},
  };
  return patterns;
}

/// Builds one candidate program. Legality is tracked per computation:
/// `written` holds every field assigned anywhere in the computation.
class Generator {
public:
  Generator(std::mt19937_64 &rng, std::string name) : rng_(rng), name_(std::move(name)) {}

  RandomStencil build() {
    const bool in1_f32 = chance(0.2);
    std::ostringstream os;
    os << "stencil " << name_ << "(in0: Field[f64], in1: Field[" << (in1_f32 ? "f32" : "f64")
       << "], out0: Field[f64], out1: Field[f64], s0: f64):\n";
    long k_min = 1;
    const int computations = uniform(1, 3);
    for (int c = 0; c < computations; ++c)
      k_min = std::max(k_min, computation(os, c));
    return {name_, os.str(), k_min, 0};
  }

private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  template <typename T> const T &pick(const std::vector<T> &v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  struct Block {
    std::string start, end;
    /// Planned top-level targets; `if` entries write outputs only.
    struct Planned {
      bool is_if = false;
      std::string target;
      std::vector<std::string> then_targets, else_targets;
    };
    std::vector<Planned> statements;
  };

  long computation(std::ostream &os, int c) {
    static const std::vector<std::string> orders = {"PARALLEL", "FORWARD", "BACKWARD"};
    order_ = pick(orders);
    const IntervalPattern &pattern = pick(interval_patterns());
    const bool bare = pattern.bounds.size() == 1 && chance(0.3);

    // Plan targets first so reads know the full written set.
    std::vector<Block> blocks;
    written_.clear();
    for (std::size_t b = 0; b < pattern.bounds.size(); ++b) {
      Block block{pattern.bounds[b].first, pattern.bounds[b].second, {}};
      const int n = uniform(1, 4);
      int temps = 0;
      for (int s = 0; s < n; ++s) {
        Block::Planned p;
        if (chance(0.2)) {
          p.is_if = true;
          for (int t = uniform(1, 2); t > 0; --t)
            p.then_targets.push_back(chance(0.5) ? "out0" : "out1");
          if (chance(0.6))
            for (int t = uniform(1, 2); t > 0; --t)
              p.else_targets.push_back(chance(0.5) ? "out0" : "out1");
          for (const auto &t : p.then_targets)
            written_.insert(t);
          for (const auto &t : p.else_targets)
            written_.insert(t);
        } else {
          double r = std::uniform_real_distribution<double>(0, 1)(rng_);
          if (r < 0.4)
            p.target = "t" + std::to_string(c) + "_" + std::to_string(b) + "_" +
                       std::to_string(temps++);
          else
            p.target = r < 0.7 ? "out0" : "out1";
          written_.insert(p.target);
        }
        block.statements.push_back(std::move(p));
      }
      blocks.push_back(std::move(block));
    }
    if (order_ == "BACKWARD")
      std::reverse(blocks.begin(), blocks.end());

    os << "    with computation(" << order_ << "):\n";
    for (const auto &block : blocks) {
      std::string indent = "        ";
      if (!bare) {
        os << "        with interval(" << block.start << ", " << block.end << "):\n";
        indent += "    ";
      }
      temps_ready_.clear();
      for (const auto &p : block.statements) {
        if (!p.is_if) {
          in_if_ = false;
          self_ = p.target;
          os << indent << p.target << " = " << expr(3) << "\n";
          if (p.target[0] == 't')
            temps_ready_.push_back(p.target);
          continue;
        }
        in_if_ = true;
        self_.clear();
        os << indent << "if " << condition() << ":\n";
        for (const auto &t : p.then_targets) {
          self_ = t;
          os << indent << "    " << t << " = " << expr(2) << "\n";
        }
        if (!p.else_targets.empty()) {
          os << indent << "else:\n";
          for (const auto &t : p.else_targets) {
            self_ = t;
            os << indent << "    " << t << " = " << expr(2) << "\n";
          }
        }
      }
    }
    return pattern.k_min;
  }

  std::string condition() {
    static const std::vector<std::string> cmp = {"<", "<=", ">", ">=", "==", "!="};
    std::string c = expr(1) + " " + pick(cmp) + " " + expr(1);
    if (chance(0.25))
      c = "(" + c + ") " + (chance(0.5) ? "and" : "or") + " (" + expr(1) + " " + pick(cmp) +
          " " + expr(1) + ")";
    return c;
  }

  std::string offset(bool horizontal, bool vertical) {
    int i = horizontal ? uniform(-2, 2) : 0;
    int j = horizontal ? uniform(-2, 2) : 0;
    int k = vertical ? uniform(-2, 2) : 0;
    return "[" + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) + "]";
  }

  std::string leaf() {
    double r = std::uniform_real_distribution<double>(0, 1)(rng_);
    if (r < 0.1)
      return "s0";
    if (r < 0.2) {
      static const std::vector<std::string> literals = {"0.5", "1.25", "2.0", "3.0", "0.75"};
      return pick(literals);
    }
    if (r < 0.35 && !temps_ready_.empty()) {
      const std::string &t = pick(temps_ready_);
      // Temporaries are read on the level they were written on.
      return t + offset(!in_if_ && t != self_, false);
    }
    static const std::vector<std::string> fields = {"in0", "in1", "out0", "out1"};
    const std::string &f = pick(fields);
    const bool is_written = written_.count(f) > 0;
    if (f == self_)
      return f + "[0,0,0]";
    return f + offset(!(is_written && in_if_), !is_written);
  }

  std::string expr(int depth) {
    if (depth == 0 || chance(0.25))
      return leaf();
    switch (uniform(0, 9)) {
    case 0: return "(" + expr(depth - 1) + " + " + expr(depth - 1) + ")";
    case 1: return "(" + expr(depth - 1) + " - " + expr(depth - 1) + ")";
    case 2: return "(" + expr(depth - 1) + " * " + expr(depth - 1) + ")";
    case 3: return "(" + expr(depth - 1) + " / (1.5 + abs(" + expr(depth - 1) + ")))";
    case 4: return "min(" + expr(depth - 1) + ", " + expr(depth - 1) + ")";
    case 5: return "max(" + expr(depth - 1) + ", " + expr(depth - 1) + ")";
    case 6: return "sqrt(abs(" + expr(depth - 1) + "))";
    case 7: return "-" + leaf();
    case 8: return (chance(0.5) ? "floor(" : "ceil(") + expr(depth - 1) + ")";
    default: return "(" + expr(depth - 1) + " * 0.5 + " + expr(depth - 1) + ")";
    }
  }

  std::mt19937_64 &rng_;
  std::string name_;
  std::string order_;
  std::set<std::string> written_;
  std::vector<std::string> temps_ready_;
  std::string self_;
  bool in_if_ = false;
};

bool compiles(const RandomStencil &s) {
  try {
    StencilDefinition def = load_stencil({s.source, s.name + ".gts"}, s.name, {});
    lower(def, s.name + ".gts");
    return true;
  } catch (const Error &) {
    return false;
  }
}

} // namespace

RandomStencil random_stencil(std::mt19937_64 &rng, int index) {
  int rejected = 0;
  while (true) {
    RandomStencil s = Generator(rng, "rnd" + std::to_string(index)).build();
    if (compiles(s)) {
      s.rejected = rejected;
      return s;
    }
    ++rejected;
  }
}

Index3 random_domain(std::mt19937_64 &rng, long k_min, long max_size) {
  std::uniform_int_distribution<long> horizontal(1, max_size);
  std::uniform_int_distribution<long> vertical(std::max(1L, k_min), std::max(k_min, max_size));
  return {horizontal(rng), horizontal(rng), vertical(rng)};
}

} // namespace gts::testing
