#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cep/spatial.hpp"
#include "cep/temporal.hpp"

namespace cep::veql {

enum class Comparator { Eq, Ne, Lt, Gt, Le, Ge };

std::string to_string(Comparator c);

template <typename T>
bool compare(const T& lhs, Comparator c, const T& rhs) {
  switch (c) {
    case Comparator::Eq: return lhs == rhs;
    case Comparator::Ne: return lhs != rhs;
    case Comparator::Lt: return lhs < rhs;
    case Comparator::Gt: return lhs > rhs;
    case Comparator::Le: return lhs <= rhs;
    case Comparator::Ge: return lhs >= rhs;
  }
  return false;
}

using Literal = std::variant<std::string, double>;

struct FieldRef {
  enum class Kind { Label, Attribute };
  Kind kind = Kind::Label;
  std::string attribute;  // lowercased; empty for Label

  bool operator==(const FieldRef&) const = default;
};

/// WHERE-clause tree. And/Or hold children; Compare and Count are leaves.
struct Condition {
  enum class Kind { And, Or, Compare, Count };

  Kind kind = Kind::Compare;
  std::vector<Condition> children;
  std::string variable;
  FieldRef field;
  Comparator cmp = Comparator::Eq;
  Literal value;
  bool per_frame = false;

  bool operator==(const Condition&) const = default;
};

struct Pattern {
  enum class Kind { Object, Spatial, Temporal, Composite };

  Kind kind = Kind::Object;
  std::string function;  // canonical upper-case name; empty for Object
  std::vector<std::string> args;

  bool operator==(const Pattern&) const = default;
};

struct WindowSpec {
  double length_s = 10.0;
  std::optional<double> slide_s;

  bool operator==(const WindowSpec&) const = default;
};

struct ConfidenceClause {
  Comparator cmp = Comparator::Gt;
  double threshold = 0.5;

  bool satisfied_by(double score) const { return compare(score, cmp, threshold); }
  bool operator==(const ConfidenceClause&) const = default;
};

struct QueryAST {
  Pattern pattern;
  std::string producer;
  Condition conditions;
  WindowSpec window;
  ConfidenceClause confidence;

  bool operator==(const QueryAST&) const = default;
};

class QueryError : public std::runtime_error {
 public:
  enum class Kind { Lexical, Syntax, Semantic };

  QueryError(Kind kind, const std::string& message, int line = 0, int column = 0,
             std::vector<std::string> expected = {});

  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  Kind kind_;
  int line_;
  int column_;
  std::vector<std::string> expected_;
};

/// A named pattern macro such as HIGH_TRAFFIC_FLOW(Object). It binds
/// `arity` object variables and requires a COUNT step; when the query has no
/// COUNT predicate the default below is used.
struct CompositeDefinition {
  std::size_t arity = 1;
  Comparator default_cmp = Comparator::Gt;
  double default_count = 5;
  bool default_per_frame = true;
};

class CompositeRegistry {
 public:
  /// Registry holding the built-in HIGH_TRAFFIC_FLOW.
  static const CompositeRegistry& builtin();

  void add(std::string name, CompositeDefinition def);
  const CompositeDefinition* find(std::string_view name) const;

 private:
  std::map<std::string, CompositeDefinition, std::less<>> defs_;
};

QueryAST parse_veql(std::string_view text,
                    const CompositeRegistry& registry = CompositeRegistry::builtin());

/// Canonical text; parse_veql(render_veql(ast)) == ast.
std::string render_veql(const QueryAST& ast);

// ---------------------------------------------------------------------------
// Compiled plan

struct QueryNode {
  std::string key;  // "Object1:Car" style
  std::string variable;
  std::optional<std::string> label;  // top-level label equality, if any
  std::optional<Condition> filter;   // compare-only tree over this variable

  bool matches(const ObjectNode& node) const;
};

struct SpatialStep {
  SpatialRelation relation;
  std::string subject_key;
  std::string reference_key;
};

struct TemporalStep {
  TemporalOperator op = TemporalOperator::Seq;
  std::vector<std::string> key_order;
};

struct CountStep {
  std::string key;
  Comparator cmp = Comparator::Gt;
  double value = 0;
  bool per_frame = false;

  bool satisfied_by(std::size_t count) const {
    return compare(static_cast<double>(count), cmp, value);
  }
};

enum class PatternKind { Object, Spatial, Temporal, Count };

std::string to_string(PatternKind k);

struct QueryPlan {
  std::string query_id;
  std::string producer;
  std::vector<QueryNode> nodes;
  std::optional<SpatialStep> spatial;
  std::optional<TemporalStep> temporal;
  std::optional<CountStep> count;
  WindowSpec window;
  ConfidenceClause confidence;
  std::vector<std::string> warnings;

  PatternKind kind() const;
  const QueryNode* node(const std::string& key) const;
};

QueryPlan compile_query(const QueryAST& ast, std::string query_id = {},
                        const CompositeRegistry& registry = CompositeRegistry::builtin());

/// Multi-line description used by `engine check`.
std::string describe(const QueryPlan& plan);

}  // namespace cep::veql
