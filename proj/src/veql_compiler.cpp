#include <algorithm>
#include <set>
#include <sstream>

#include "cep/veql.hpp"

namespace cep::veql {

std::string to_string(PatternKind k) {
  switch (k) {
    case PatternKind::Object: return "OBJECT";
    case PatternKind::Spatial: return "SPATIAL";
    case PatternKind::Temporal: return "TEMPORAL";
    case PatternKind::Count: return "COUNT";
  }
  return "?";
}

namespace {

bool eval_compare(const Condition& c, const ObjectNode& node) {
  const auto& want = std::get<std::string>(c.value);
  if (c.field.kind == FieldRef::Kind::Label) return compare(node.label, c.cmp, want);
  auto it = node.attributes.find(c.field.attribute);
  if (it == node.attributes.end()) return false;
  return compare(it->second, c.cmp, want);
}

bool eval_filter(const Condition& c, const ObjectNode& node) {
  switch (c.kind) {
    case Condition::Kind::Compare: return eval_compare(c, node);
    case Condition::Kind::And:
      return std::all_of(c.children.begin(), c.children.end(),
                         [&](const Condition& ch) { return eval_filter(ch, node); });
    case Condition::Kind::Or:
      return std::any_of(c.children.begin(), c.children.end(),
                         [&](const Condition& ch) { return eval_filter(ch, node); });
    case Condition::Kind::Count: return true;
  }
  return false;
}

[[noreturn]] void semantic(const std::string& what) {
  throw QueryError(QueryError::Kind::Semantic, what);
}

void collect(const Condition& c, std::set<std::string>& vars, bool& has_count) {
  if (c.kind == Condition::Kind::Compare || c.kind == Condition::Kind::Count) {
    vars.insert(c.variable);
    has_count = has_count || c.kind == Condition::Kind::Count;
    return;
  }
  for (const auto& ch : c.children) collect(ch, vars, has_count);
}

std::string render_leaf(const Condition& c) {
  QueryAST tmp;
  tmp.conditions = c;
  std::string full = render_veql(tmp);
  auto where = full.find(" WHERE ");
  auto within = full.find(" WITHIN ");
  return full.substr(where + 7, within - where - 7);
}

}  // namespace

bool QueryNode::matches(const ObjectNode& node) const {
  return !filter || eval_filter(*filter, node);
}

PatternKind QueryPlan::kind() const {
  if (count) return PatternKind::Count;
  if (spatial) return PatternKind::Spatial;
  if (temporal) return PatternKind::Temporal;
  return PatternKind::Object;
}

const QueryNode* QueryPlan::node(const std::string& key) const {
  for (const auto& n : nodes)
    if (n.key == key) return &n;
  return nullptr;
}

QueryPlan compile_query(const QueryAST& ast, std::string query_id,
                        const CompositeRegistry& registry) {
  QueryPlan plan;
  plan.query_id = std::move(query_id);
  plan.producer = ast.producer;
  plan.window = ast.window;
  plan.confidence = ast.confidence;

  const auto& args = ast.pattern.args;
  if (args.empty()) semantic("pattern declares no object variable");
  std::set<std::string> declared(args.begin(), args.end());
  if (declared.size() != args.size()) semantic("pattern repeats an object variable");

  // Split the WHERE clause into top-level conjuncts, each either a COUNT or
  // a constraint on exactly one object variable.
  std::vector<const Condition*> conjuncts;
  if (ast.conditions.kind == Condition::Kind::And) {
    for (const auto& ch : ast.conditions.children) conjuncts.push_back(&ch);
  } else {
    conjuncts.push_back(&ast.conditions);
  }

  std::map<std::string, std::vector<Condition>> per_var;
  std::optional<Condition> count_pred;
  for (const Condition* c : conjuncts) {
    std::set<std::string> vars;
    bool has_count = false;
    collect(*c, vars, has_count);
    for (const auto& v : vars)
      if (!declared.contains(v)) semantic("predicate references undeclared variable '" + v + "'");
    if (c->kind == Condition::Kind::Count) {
      if (count_pred) semantic("at most one COUNT predicate is supported");
      count_pred = *c;
      continue;
    }
    if (has_count) semantic("COUNT must appear as a top-level AND operand");
    if (vars.size() != 1)
      semantic("a disjunction may only constrain a single object variable: " + render_leaf(*c));
    per_var[*vars.begin()].push_back(*c);
  }

  for (const auto& var : args) {
    QueryNode n;
    n.variable = var;
    auto it = per_var.find(var);
    if (it != per_var.end()) {
      for (const auto& c : it->second) {
        if (c.kind == Condition::Kind::Compare && c.field.kind == FieldRef::Kind::Label &&
            c.cmp == Comparator::Eq && !n.label)
          n.label = std::get<std::string>(c.value);
      }
      if (it->second.size() == 1) {
        n.filter = it->second.front();
      } else {
        Condition all;
        all.kind = Condition::Kind::And;
        all.children = it->second;
        n.filter = std::move(all);
      }
    }
    n.key = n.label ? var + ":" + *n.label : var;
    plan.nodes.push_back(std::move(n));
  }

  auto key_of = [&](const std::string& var) {
    for (const auto& n : plan.nodes)
      if (n.variable == var) return n.key;
    return var;
  };

  switch (ast.pattern.kind) {
    case Pattern::Kind::Object:
      if (args.size() != 1) semantic("object pattern binds exactly one variable");
      break;
    case Pattern::Kind::Spatial: {
      if (args.size() != 2)
        semantic(ast.pattern.function + " takes exactly two object variables");
      if (count_pred) semantic("COUNT cannot be combined with a spatial pattern");
      auto rel = parse_spatial_relation(ast.pattern.function);
      if (!rel) semantic("unknown spatial relation " + ast.pattern.function);
      if (*rel == SpatialRelation{TopologyRelation::Crosses})
        plan.warnings.push_back(
            "CROSSES never holds between two bounding boxes; this query cannot match");
      plan.spatial = SpatialStep{*rel, key_of(args[0]), key_of(args[1])};
      break;
    }
    case Pattern::Kind::Temporal: {
      TemporalStep step;
      const auto& f = ast.pattern.function;
      step.op = f == "SEQ"    ? TemporalOperator::Seq
                : f == "EQ"   ? TemporalOperator::Eq
                : f == "CONJ" ? TemporalOperator::Conj
                              : TemporalOperator::Disj;
      if (step.op != TemporalOperator::Disj && args.size() < 2)
        semantic(f + " needs at least two object variables");
      if (count_pred) semantic("COUNT cannot be combined with a temporal pattern");
      for (const auto& a : args) step.key_order.push_back(key_of(a));
      plan.temporal = std::move(step);
      break;
    }
    case Pattern::Kind::Composite: {
      const CompositeDefinition* def = registry.find(ast.pattern.function);
      if (!def) semantic("unknown composite pattern " + ast.pattern.function);
      if (args.size() != def->arity)
        semantic(ast.pattern.function + " takes " + std::to_string(def->arity) +
                 " object variable(s)");
      if (!count_pred) {
        Condition c;
        c.kind = Condition::Kind::Count;
        c.variable = args.front();
        c.cmp = def->default_cmp;
        c.value = def->default_count;
        c.per_frame = def->default_per_frame;
        count_pred = c;
      }
      break;
    }
  }

  if (count_pred) {
    if (args.size() != 1) semantic("COUNT requires a single-variable pattern");
    plan.count = CountStep{key_of(count_pred->variable), count_pred->cmp,
                           std::get<double>(count_pred->value), count_pred->per_frame};
  }
  return plan;
}

std::string describe(const QueryPlan& plan) {
  std::ostringstream os;
  os << "query " << (plan.query_id.empty() ? "<unnamed>" : plan.query_id) << " on producer "
     << plan.producer << "\n";
  os << "  kind: " << to_string(plan.kind()) << "\n";
  for (const auto& n : plan.nodes) {
    os << "  node " << n.key;
    if (n.filter) os << " where " << render_leaf(*n.filter);
    os << "\n";
  }
  if (plan.spatial)
    os << "  spatial: " << to_string(plan.spatial->relation) << "(" << plan.spatial->subject_key
       << ", reference=" << plan.spatial->reference_key << ")\n";
  if (plan.temporal) {
    os << "  temporal: " << to_string(plan.temporal->op) << "(";
    for (std::size_t i = 0; i < plan.temporal->key_order.size(); ++i)
      os << (i ? ", " : "") << plan.temporal->key_order[i];
    os << ")\n";
  }
  if (plan.count)
    os << "  count: COUNT(" << plan.count->key << ") " << to_string(plan.count->cmp) << " "
       << plan.count->value << (plan.count->per_frame ? " for each frame" : " in some frame")
       << "\n";
  os << "  window: " << plan.window.length_s << " s";
  if (plan.window.slide_s) os << ", slide " << *plan.window.slide_s << " s";
  else os << " tumbling";
  os << "\n  confidence " << to_string(plan.confidence.cmp) << " " << plan.confidence.threshold
     << "\n";
  for (const auto& w : plan.warnings) os << "  warning: " << w << "\n";
  return os.str();
}

}  // namespace cep::veql
