#ifndef HORNARR_MODEL_HPP
#define HORNARR_MODEL_HPP

#include "smt2.hpp"
#include "term.hpp"

#include <algorithm>
#include <memory>
#include <optional>

namespace hornarr
{
  struct EvalError : std::runtime_error
  {
    explicit EvalError(const std::string& m) : std::runtime_error(m) {}
  };

  struct ProtocolError : std::runtime_error
  {
    explicit ProtocolError(const std::string& m) : std::runtime_error(m) {}
  };

  struct ArrayValue;

  struct Value
  {
    Sort sort = nullptr;
    int64_t i = 0;
    bool b = false;
    std::shared_ptr<const ArrayValue> arr;

    static Value of_int(int64_t v)
    {
      Value x;
      x.sort = int_sort();
      x.i = v;
      return x;
    }
    static Value of_bool(bool v)
    {
      Value x;
      x.sort = bool_sort();
      x.b = v;
      return x;
    }
    static Value of_array(Sort s, std::shared_ptr<const ArrayValue> a)
    {
      Value x;
      x.sort = s;
      x.arr = std::move(a);
      return x;
    }
  };

  int compare(const Value& x, const Value& y);

  inline bool operator==(const Value& x, const Value& y) { return compare(x, y) == 0; }
  inline bool operator!=(const Value& x, const Value& y) { return compare(x, y) != 0; }
  inline bool operator<(const Value& x, const Value& y) { return compare(x, y) < 0; }

  // Canonical form: the graph never maps an index to the default value.
  struct ArrayValue
  {
    Value dflt;
    std::map<Value, Value> graph;

    Value at(const Value& idx) const
    {
      auto it = graph.find(idx);
      return it == graph.end() ? dflt : it->second;
    }
  };

  inline int compare(const Value& x, const Value& y)
  {
    if (x.sort != y.sort)
      throw EvalError("comparing values of different sorts");
    switch (x.sort->kind)
    {
      case SortNode::Int: return x.i < y.i ? -1 : x.i > y.i ? 1 : 0;
      case SortNode::Bool: return x.b == y.b ? 0 : (x.b ? 1 : -1);
      default:
      {
        int c = compare(x.arr->dflt, y.arr->dflt);
        if (c) return c;
        auto xi = x.arr->graph.begin(), yi = y.arr->graph.begin();
        for (; xi != x.arr->graph.end() && yi != y.arr->graph.end(); ++xi, ++yi)
        {
          c = compare(xi->first, yi->first);
          if (c) return c;
          c = compare(xi->second, yi->second);
          if (c) return c;
        }
        if (xi != x.arr->graph.end()) return 1;
        if (yi != y.arr->graph.end()) return -1;
        return 0;
      }
    }
  }

  inline Value mk_array_value(Sort s, Value dflt, std::map<Value, Value> graph)
  {
    auto av = std::make_shared<ArrayValue>();
    av->dflt = std::move(dflt);
    for (auto& kv : graph)
      if (kv.second != av->dflt) av->graph.emplace(kv.first, kv.second);
    return Value::of_array(s, std::move(av));
  }

  inline Value default_value(Sort s)
  {
    switch (s->kind)
    {
      case SortNode::Int: return Value::of_int(0);
      case SortNode::Bool: return Value::of_bool(false);
      default: return mk_array_value(s, default_value(s->value), {});
    }
  }

  // Interpretations of an Int index sort. Absent spec means the standard
  // infinite domain; Bool indices are always the two-element domain.
  struct IndexDomain
  {
    std::vector<int64_t> ints;
  };

  struct Model
  {
    std::map<Term, Value> assignment;

    bool has(Term v) const { return assignment.count(v) != 0; }

    const Value& get(Term v) const
    {
      auto it = assignment.find(v);
      if (it == assignment.end())
        throw EvalError("unassigned variable " + v->name);
      return it->second;
    }

    void set(Term v, Value val)
    {
      if (v->kind != Kind::Var) throw EvalError("model keys must be variables");
      if (v->sort != val.sort) throw EvalError("model value sort mismatch for " + v->name);
      assignment[v] = std::move(val);
    }
  };

  inline std::vector<Value> index_universe(Sort idx_sort, const IndexDomain* fd)
  {
    if (idx_sort->kind == SortNode::Bool)
      return {Value::of_bool(false), Value::of_bool(true)};
    if (fd)
    {
      std::vector<Value> out;
      for (int64_t v : fd->ints) out.push_back(Value::of_int(v));
      return out;
    }
    return {};  // infinite
  }

  inline Value eval(const Model& m, Term t, const IndexDomain* fd = nullptr)
  {
    switch (t->kind)
    {
      case Kind::Var: return m.get(t);
      case Kind::IntLit: return Value::of_int(t->num);
      case Kind::BoolLit: return Value::of_bool(t->num != 0);
      case Kind::Add:
      {
        int64_t acc = 0;
        for (Term a : t->args) acc += eval(m, a, fd).i;
        return Value::of_int(acc);
      }
      case Kind::Mul: return Value::of_int(t->num * eval(m, t->arg(0), fd).i);
      case Kind::Neg: return Value::of_int(-eval(m, t->arg(0), fd).i);
      case Kind::Divides:
      {
        int64_t v = eval(m, t->arg(0), fd).i;
        return Value::of_bool(((v % t->num) + t->num) % t->num == 0);
      }
      case Kind::Lt: return Value::of_bool(eval(m, t->arg(0), fd).i < eval(m, t->arg(1), fd).i);
      case Kind::Le: return Value::of_bool(eval(m, t->arg(0), fd).i <= eval(m, t->arg(1), fd).i);
      case Kind::Eq: return Value::of_bool(eval(m, t->arg(0), fd) == eval(m, t->arg(1), fd));
      case Kind::And:
      {
        for (Term a : t->args)
          if (!eval(m, a, fd).b) return Value::of_bool(false);
        return Value::of_bool(true);
      }
      case Kind::Or:
      {
        for (Term a : t->args)
          if (eval(m, a, fd).b) return Value::of_bool(true);
        return Value::of_bool(false);
      }
      case Kind::Not: return Value::of_bool(!eval(m, t->arg(0), fd).b);
      case Kind::Ite:
        return eval(m, t->arg(0), fd).b ? eval(m, t->arg(1), fd) : eval(m, t->arg(2), fd);
      case Kind::Rd:
      {
        Value a = eval(m, t->arg(0), fd);
        return a.arr->at(eval(m, t->arg(1), fd));
      }
      case Kind::Wr:
      {
        Value a = eval(m, t->arg(0), fd);
        auto graph = a.arr->graph;
        graph[eval(m, t->arg(1), fd)] = eval(m, t->arg(2), fd);
        return mk_array_value(t->sort, a.arr->dflt, std::move(graph));
      }
      case Kind::Peq:
      {
        Value a = eval(m, t->arg(0), fd);
        Value b = eval(m, t->arg(1), fd);
        std::set<Value> excl;
        for (Term i : peq_excl(t)) excl.insert(eval(m, i, fd));
        Sort idx = t->arg(0)->sort->index;
        std::vector<Value> dom = index_universe(idx, fd);
        if (!dom.empty())
        {
          for (const Value& d : dom)
          {
            if (excl.count(d)) continue;
            if (a.arr->at(d) != b.arr->at(d)) return Value::of_bool(false);
          }
          return Value::of_bool(true);
        }
        // infinite index domain: defaults must agree, graphs must agree
        // outside the excluded indices
        if (a.arr->dflt != b.arr->dflt) return Value::of_bool(false);
        std::set<Value> keys;
        for (auto& kv : a.arr->graph) keys.insert(kv.first);
        for (auto& kv : b.arr->graph) keys.insert(kv.first);
        for (const Value& k : keys)
        {
          if (excl.count(k)) continue;
          if (a.arr->at(k) != b.arr->at(k)) return Value::of_bool(false);
        }
        return Value::of_bool(true);
      }
    }
    throw EvalError("eval: unreachable");
  }

  inline bool eval_bool(const Model& m, Term t, const IndexDomain* fd = nullptr)
  {
    Value v = eval(m, t, fd);
    if (v.sort != bool_sort()) throw EvalError("expected a formula");
    return v.b;
  }

  inline Model complete(Model m, const TermVec& vars)
  {
    for (Term v : vars)
      if (!m.has(v)) m.set(v, default_value(v->sort));
    return m;
  }

  // --- parsing of get-model / get-value responses ---

  inline Value parse_value(const SExpr& e, Sort s,
                           const std::map<std::string, SExpr>& env = {})
  {
    if (e.is_atom())
    {
      auto it = env.find(e.atom);
      if (it != env.end()) return parse_value(it->second, s, env);
      if (s->kind == SortNode::Bool)
      {
        if (e.atom == "true") return Value::of_bool(true);
        if (e.atom == "false") return Value::of_bool(false);
      }
      if (s->kind == SortNode::Int && is_integer_atom(e.atom))
        return Value::of_int(std::stoll(e.atom));
      throw ProtocolError("cannot interpret model value " + e.atom);
    }
    // (let ((x e) ...) body): abbreviations some solvers print in values
    if (e.size() == 3 && e[0].is_atom() && e[0].atom == "let")
    {
      std::map<std::string, SExpr> inner = env;
      for (size_t k = 0; k < e[1].size(); k++)
        inner[e[1][k][0].atom] = e[1][k][1];
      return parse_value(e[2], s, inner);
    }
    if (e.size() == 2 && e[0].is_atom() && e[0].atom == "-")
      return Value::of_int(-parse_value(e[1], int_sort(), env).i);
    // ((as const (Array I V)) v)
    if (e.size() == 2 && !e[0].is_atom() && e[0].size() == 3 && e[0][0].atom == "as" &&
        e[0][1].atom == "const")
    {
      Sort as = parse_sort(e[0][2]);
      if (as != s) throw ProtocolError("const array sort mismatch");
      return mk_array_value(s, parse_value(e[1], s->value, env), {});
    }
    if (e.size() == 4 && e[0].is_atom() && e[0].atom == "store")
    {
      Value base = parse_value(e[1], s, env);
      auto graph = base.arr->graph;
      graph[parse_value(e[2], s->index, env)] = parse_value(e[3], s->value, env);
      return mk_array_value(s, base.arr->dflt, std::move(graph));
    }
    throw ProtocolError("unsupported model value form " + e.str());
  }

  // Accepts the list of define-funs in a get-model response. Entries whose
  // name is not among vars (e.g. definitions for named assertions) are
  // ignored. The result is completed over vars.
  inline Model parse_model(const SExpr& resp, const TermVec& vars)
  {
    std::map<std::string, Term> byname;
    for (Term v : vars) byname[v->name] = v;
    Model m;
    size_t start = 0;
    if (resp.size() > 0 && resp[0].is_atom() && resp[0].atom == "model") start = 1;
    for (size_t k = start; k < resp.size(); k++)
    {
      const SExpr& d = resp[k];
      if (d.size() != 5 || !d[0].is_atom() || d[0].atom != "define-fun") continue;
      auto it = byname.find(d[1].atom);
      if (it == byname.end()) continue;
      if (!d[2].items.empty() || !d[2].atom.empty())
        throw ProtocolError("function-valued model entry for " + d[1].atom);
      Sort s = parse_sort(d[3]);
      if (s != it->second->sort)
        throw ProtocolError("model sort mismatch for " + d[1].atom);
      m.set(it->second, parse_value(d[4], s));
    }
    return complete(std::move(m), vars);
  }

  inline Model parse_model(const std::string& text, const TermVec& vars)
  {
    auto es = read_sexprs(text);
    if (es.size() != 1) throw ProtocolError("expected one model response");
    return parse_model(es[0], vars);
  }
}

#endif
