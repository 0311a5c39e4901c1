#ifndef HORNARR_TERM_HPP
#define HORNARR_TERM_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hornarr
{
  struct SortNode;
  using Sort = const SortNode*;

  struct SortNode
  {
    enum Kind { Bool, Int, Array };
    Kind kind;
    Sort index = nullptr;   // Array only
    Sort value = nullptr;   // Array only
  };

  inline Sort bool_sort()
  {
    static SortNode s{SortNode::Bool};
    return &s;
  }

  inline Sort int_sort()
  {
    static SortNode s{SortNode::Int};
    return &s;
  }

  inline Sort array_sort(Sort index, Sort value)
  {
    if (index->kind == SortNode::Array)
      throw std::invalid_argument("array index sort must be basic");
    static std::map<std::pair<Sort, Sort>, std::unique_ptr<SortNode>> tbl;
    auto& slot = tbl[{index, value}];
    if (!slot) slot.reset(new SortNode{SortNode::Array, index, value});
    return slot.get();
  }

  inline std::string sort_name(Sort s)
  {
    switch (s->kind)
    {
      case SortNode::Bool: return "Bool";
      case SortNode::Int: return "Int";
      default: return "(Array " + sort_name(s->index) + " " + sort_name(s->value) + ")";
    }
  }

  enum class Kind
  {
    Var, IntLit, BoolLit,
    Add, Mul, Neg, Divides,
    Lt, Le, Eq,
    And, Or, Not, Ite,
    Rd, Wr, Peq
  };

  struct TermNode;
  using Term = const TermNode*;
  using TermVec = std::vector<Term>;

  // Immutable, hash-consed. Peq args are [lhs, rhs, excluded indices...].
  struct TermNode
  {
    Kind kind;
    Sort sort;
    int64_t num = 0;        // IntLit value, Mul coefficient, Divides divisor
    std::string name;       // Var only
    TermVec args;
    size_t hash = 0;
    unsigned id = 0;

    Term arg(size_t k) const { return args[k]; }
  };

  namespace detail
  {
    struct NodeHash
    {
      size_t operator()(const TermNode* n) const { return n->hash; }
    };
    struct NodeEq
    {
      bool operator()(const TermNode* x, const TermNode* y) const
      {
        return x->kind == y->kind && x->sort == y->sort && x->num == y->num &&
               x->name == y->name && x->args == y->args;
      }
    };

    inline Term intern(TermNode&& n)
    {
      static std::unordered_set<TermNode*, NodeHash, NodeEq> tbl;
      static std::vector<std::unique_ptr<TermNode>> pool;
      size_t h = std::hash<int>()(static_cast<int>(n.kind));
      h = h * 31 + std::hash<const void*>()(n.sort);
      h = h * 31 + std::hash<int64_t>()(n.num);
      h = h * 31 + std::hash<std::string>()(n.name);
      for (Term a : n.args) h = h * 31 + a->hash;
      n.hash = h;
      auto it = tbl.find(&n);
      if (it != tbl.end()) return *it;
      pool.emplace_back(new TermNode(std::move(n)));
      TermNode* p = pool.back().get();
      p->id = static_cast<unsigned>(pool.size());
      tbl.insert(p);
      return p;
    }
  }

  inline Term mk_var(const std::string& name, Sort s)
  {
    TermNode n;
    n.kind = Kind::Var;
    n.sort = s;
    n.name = name;
    return detail::intern(std::move(n));
  }

  inline Term mk_int(int64_t v)
  {
    TermNode n;
    n.kind = Kind::IntLit;
    n.sort = int_sort();
    n.num = v;
    return detail::intern(std::move(n));
  }

  inline Term mk_bool(bool v)
  {
    TermNode n;
    n.kind = Kind::BoolLit;
    n.sort = bool_sort();
    n.num = v ? 1 : 0;
    return detail::intern(std::move(n));
  }

  inline Term mk_true() { return mk_bool(true); }
  inline Term mk_false() { return mk_bool(false); }

  inline bool is_true(Term t) { return t->kind == Kind::BoolLit && t->num == 1; }
  inline bool is_false(Term t) { return t->kind == Kind::BoolLit && t->num == 0; }

  inline void expect_sort(Term t, Sort s, const char* who)
  {
    if (t->sort != s)
      throw std::invalid_argument(std::string(who) + ": sort mismatch, got " + sort_name(t->sort));
  }

  inline Term mk_node(Kind k, Sort s, TermVec args, int64_t num = 0)
  {
    TermNode n;
    n.kind = k;
    n.sort = s;
    n.num = num;
    n.args = std::move(args);
    return detail::intern(std::move(n));
  }

  inline Term mk_add(TermVec args)
  {
    TermVec flat;
    for (Term a : args)
    {
      expect_sort(a, int_sort(), "mk_add");
      if (a->kind == Kind::Add)
        flat.insert(flat.end(), a->args.begin(), a->args.end());
      else
        flat.push_back(a);
    }
    if (flat.size() == 1) return flat[0];
    return mk_node(Kind::Add, int_sort(), std::move(flat));
  }

  inline Term mk_add(Term a, Term b) { return mk_add(TermVec{a, b}); }

  inline Term mk_mul(int64_t c, Term t)
  {
    expect_sort(t, int_sort(), "mk_mul");
    if (c == 1) return t;
    return mk_node(Kind::Mul, int_sort(), {t}, c);
  }

  inline Term mk_neg(Term t)
  {
    expect_sort(t, int_sort(), "mk_neg");
    if (t->kind == Kind::IntLit) return mk_int(-t->num);
    if (t->kind == Kind::Neg) return t->arg(0);
    return mk_node(Kind::Neg, int_sort(), {t});
  }

  inline Term mk_divides(int64_t d, Term t)
  {
    if (d <= 0) throw std::invalid_argument("mk_divides: divisor must be positive");
    expect_sort(t, int_sort(), "mk_divides");
    return mk_node(Kind::Divides, bool_sort(), {t}, d);
  }

  inline Term mk_lt(Term a, Term b)
  {
    expect_sort(a, int_sort(), "mk_lt");
    expect_sort(b, int_sort(), "mk_lt");
    return mk_node(Kind::Lt, bool_sort(), {a, b});
  }

  inline Term mk_le(Term a, Term b)
  {
    expect_sort(a, int_sort(), "mk_le");
    expect_sort(b, int_sort(), "mk_le");
    return mk_node(Kind::Le, bool_sort(), {a, b});
  }

  inline Term mk_gt(Term a, Term b) { return mk_lt(b, a); }
  inline Term mk_ge(Term a, Term b) { return mk_le(b, a); }

  inline Term mk_eq(Term a, Term b)
  {
    if (a->sort != b->sort)
      throw std::invalid_argument("mk_eq: sort mismatch");
    return mk_node(Kind::Eq, bool_sort(), {a, b});
  }

  inline Term mk_and(TermVec args)
  {
    TermVec flat;
    for (Term a : args)
    {
      expect_sort(a, bool_sort(), "mk_and");
      if (is_true(a)) continue;
      if (is_false(a)) return mk_false();
      if (a->kind == Kind::And)
        flat.insert(flat.end(), a->args.begin(), a->args.end());
      else
        flat.push_back(a);
    }
    if (flat.empty()) return mk_true();
    if (flat.size() == 1) return flat[0];
    return mk_node(Kind::And, bool_sort(), std::move(flat));
  }

  inline Term mk_and(Term a, Term b) { return mk_and(TermVec{a, b}); }

  inline Term mk_or(TermVec args)
  {
    TermVec flat;
    for (Term a : args)
    {
      expect_sort(a, bool_sort(), "mk_or");
      if (is_false(a)) continue;
      if (is_true(a)) return mk_true();
      if (a->kind == Kind::Or)
        flat.insert(flat.end(), a->args.begin(), a->args.end());
      else
        flat.push_back(a);
    }
    if (flat.empty()) return mk_false();
    if (flat.size() == 1) return flat[0];
    return mk_node(Kind::Or, bool_sort(), std::move(flat));
  }

  inline Term mk_or(Term a, Term b) { return mk_or(TermVec{a, b}); }

  inline Term mk_not(Term t)
  {
    expect_sort(t, bool_sort(), "mk_not");
    if (t->kind == Kind::Not) return t->arg(0);
    if (is_true(t)) return mk_false();
    if (is_false(t)) return mk_true();
    return mk_node(Kind::Not, bool_sort(), {t});
  }

  inline Term mk_neq(Term a, Term b) { return mk_not(mk_eq(a, b)); }

  inline Term mk_impl(Term a, Term b) { return mk_or(mk_not(a), b); }

  inline Term mk_ite(Term c, Term t, Term e)
  {
    expect_sort(c, bool_sort(), "mk_ite");
    if (t->sort != e->sort)
      throw std::invalid_argument("mk_ite: branch sort mismatch");
    return mk_node(Kind::Ite, t->sort, {c, t, e});
  }

  inline Term mk_rd(Term a, Term i)
  {
    if (a->sort->kind != SortNode::Array)
      throw std::invalid_argument("mk_rd: not an array");
    expect_sort(i, a->sort->index, "mk_rd");
    return mk_node(Kind::Rd, a->sort->value, {a, i});
  }

  inline Term mk_wr(Term a, Term i, Term v)
  {
    if (a->sort->kind != SortNode::Array)
      throw std::invalid_argument("mk_wr: not an array");
    expect_sort(i, a->sort->index, "mk_wr");
    expect_sort(v, a->sort->value, "mk_wr");
    return mk_node(Kind::Wr, a->sort, {a, i, v});
  }

  // peq(a, b, [i..]): a and b agree at every index outside the exclusion list.
  // The list is kept in order with syntactic duplicates removed.
  inline Term mk_peq(Term a, Term b, TermVec excl)
  {
    if (a->sort != b->sort || a->sort->kind != SortNode::Array)
      throw std::invalid_argument("mk_peq: arguments must share an array sort");
    if (a == b) return mk_true();
    TermVec is;
    for (Term i : excl)
    {
      expect_sort(i, a->sort->index, "mk_peq");
      bool dup = false;
      for (Term j : is) dup = dup || i == j;
      if (!dup) is.push_back(i);
    }
    TermVec args{a, b};
    args.insert(args.end(), is.begin(), is.end());
    return mk_node(Kind::Peq, bool_sort(), std::move(args));
  }

  inline TermVec peq_excl(Term p)
  {
    return TermVec(p->args.begin() + 2, p->args.end());
  }

  // --- traversal utilities ---

  inline void collect_subterms(Term t, TermVec& out, std::unordered_set<Term>& seen)
  {
    if (!seen.insert(t).second) return;
    for (Term a : t->args) collect_subterms(a, out, seen);
    out.push_back(t);  // innermost first
  }

  inline TermVec subterms(Term t)
  {
    TermVec out;
    std::unordered_set<Term> seen;
    collect_subterms(t, out, seen);
    return out;
  }

  inline bool contains(Term t, Term sub)
  {
    if (t == sub) return true;
    for (Term a : t->args)
      if (contains(a, sub)) return true;
    return false;
  }

  inline void free_vars_rec(Term t, TermVec& out, std::unordered_set<Term>& seen)
  {
    if (!seen.insert(t).second) return;
    if (t->kind == Kind::Var) { out.push_back(t); return; }
    for (Term a : t->args) free_vars_rec(a, out, seen);
  }

  // First-occurrence order in a left-to-right traversal.
  inline TermVec free_vars(Term t)
  {
    TermVec out;
    std::unordered_set<Term> seen;
    free_vars_rec(t, out, seen);
    return out;
  }

  inline TermVec free_vars(const TermVec& ts)
  {
    TermVec out;
    std::unordered_set<Term> seen;
    for (Term t : ts) free_vars_rec(t, out, seen);
    return out;
  }

  inline Term rebuild(Term t, TermVec args)
  {
    if (args == t->args) return t;
    switch (t->kind)
    {
      case Kind::Add: return mk_add(std::move(args));
      case Kind::Mul: return mk_mul(t->num, args[0]);
      case Kind::Neg: return mk_neg(args[0]);
      case Kind::Divides: return mk_divides(t->num, args[0]);
      case Kind::Lt: return mk_lt(args[0], args[1]);
      case Kind::Le: return mk_le(args[0], args[1]);
      case Kind::Eq: return mk_eq(args[0], args[1]);
      case Kind::And: return mk_and(std::move(args));
      case Kind::Or: return mk_or(std::move(args));
      case Kind::Not: return mk_not(args[0]);
      case Kind::Ite: return mk_ite(args[0], args[1], args[2]);
      case Kind::Rd: return mk_rd(args[0], args[1]);
      case Kind::Wr: return mk_wr(args[0], args[1], args[2]);
      case Kind::Peq:
        return mk_peq(args[0], args[1], TermVec(args.begin() + 2, args.end()));
      default: return t;
    }
  }

  using TermMap = std::unordered_map<Term, Term>;

  inline Term replace_rec(Term t, const TermMap& m, TermMap& memo)
  {
    auto hit = m.find(t);
    if (hit != m.end()) return hit->second;
    if (t->args.empty()) return t;
    auto mem = memo.find(t);
    if (mem != memo.end()) return mem->second;
    TermVec args;
    args.reserve(t->args.size());
    for (Term a : t->args) args.push_back(replace_rec(a, m, memo));
    Term r = rebuild(t, std::move(args));
    memo.emplace(t, r);
    return r;
  }

  // Simultaneous replacement of every occurrence of the map's keys.
  inline Term replace(Term t, const TermMap& m)
  {
    TermMap memo;
    return replace_rec(t, m, memo);
  }

  struct Binding
  {
    Term var;          // Kind::Var
    Term replacement;  // same sort
  };

  inline Term substitute(Term t, const std::vector<Binding>& bs)
  {
    TermMap m;
    for (const auto& b : bs)
    {
      if (b.var->kind != Kind::Var || b.var->sort != b.replacement->sort)
        throw std::invalid_argument("substitute: bad binding");
      m[b.var] = b.replacement;
    }
    return replace(t, m);
  }

  inline Term substitute(Term t, Term var, Term repl)
  {
    return substitute(t, {{var, repl}});
  }

  // --- negation normal form ---

  inline Term to_nnf(Term t);
  inline Term to_nnf_neg(Term t);

  inline Term to_nnf(Term t)
  {
    switch (t->kind)
    {
      case Kind::And:
      case Kind::Or:
      {
        TermVec args;
        for (Term a : t->args) args.push_back(to_nnf(a));
        return t->kind == Kind::And ? mk_and(std::move(args)) : mk_or(std::move(args));
      }
      case Kind::Not:
        return to_nnf_neg(t->arg(0));
      case Kind::Ite:
        if (t->sort == bool_sort())
          return mk_or(mk_and(to_nnf(t->arg(0)), to_nnf(t->arg(1))),
                       mk_and(to_nnf_neg(t->arg(0)), to_nnf(t->arg(2))));
        return t;
      default:
        return t;
    }
  }

  inline Term to_nnf_neg(Term t)
  {
    switch (t->kind)
    {
      case Kind::And:
      {
        TermVec args;
        for (Term a : t->args) args.push_back(to_nnf_neg(a));
        return mk_or(std::move(args));
      }
      case Kind::Or:
      {
        TermVec args;
        for (Term a : t->args) args.push_back(to_nnf_neg(a));
        return mk_and(std::move(args));
      }
      case Kind::Not:
        return to_nnf(t->arg(0));
      case Kind::BoolLit:
        return mk_bool(t->num == 0);
      case Kind::Lt:
        return mk_le(t->arg(1), t->arg(0));
      case Kind::Le:
        return mk_lt(t->arg(1), t->arg(0));
      case Kind::Ite:
        return mk_or(mk_and(to_nnf(t->arg(0)), to_nnf_neg(t->arg(1))),
                     mk_and(to_nnf_neg(t->arg(0)), to_nnf_neg(t->arg(2))));
      default:
        return mk_not(t);  // Eq, Divides, Peq, Rd, Var stay as negated literals
    }
  }

  // Unfolds partial equalities: empty exclusion lists become equalities and
  // writes on either side are peeled off index by index.
  inline Term expand_peq(Term t)
  {
    TermVec args;
    args.reserve(t->args.size());
    for (Term a : t->args) args.push_back(expand_peq(a));
    Term r = rebuild(t, std::move(args));
    if (r->kind != Kind::Peq) return r;

    Term lhs = r->arg(0), rhs = r->arg(1);
    TermVec is = peq_excl(r);
    if (lhs->kind != Kind::Wr && rhs->kind == Kind::Wr)
      std::swap(lhs, rhs);
    if (lhs->kind == Kind::Wr)
    {
      Term base = lhs->arg(0), j = lhs->arg(1), v = lhs->arg(2);
      TermVec in_i, notin_i;
      for (Term i : is)
      {
        in_i.push_back(mk_eq(j, i));
        notin_i.push_back(mk_neq(j, i));
      }
      TermVec ij = is;
      ij.push_back(j);
      Term branch_in = mk_and(mk_or(in_i), expand_peq(mk_peq(base, rhs, is)));
      Term branch_out = mk_and(mk_and(notin_i),
                               mk_and(expand_peq(mk_peq(base, rhs, ij)),
                                      mk_eq(mk_rd(rhs, j), v)));
      return mk_or(branch_in, branch_out);
    }
    if (is.empty()) return mk_eq(lhs, rhs);
    return r;
  }

  inline TermVec conjuncts(Term t)
  {
    if (is_true(t)) return {};
    if (t->kind == Kind::And) return t->args;
    return {t};
  }

  inline TermVec disjuncts(Term t)
  {
    if (is_false(t)) return {};
    if (t->kind == Kind::Or) return t->args;
    return {t};
  }

  // Atomic predicates occurring in a formula (literals stripped of negation).
  inline void collect_atoms(Term t, TermVec& out, std::unordered_set<Term>& seen)
  {
    if (!seen.insert(t).second) return;
    switch (t->kind)
    {
      case Kind::And:
      case Kind::Or:
      case Kind::Not:
        for (Term a : t->args) collect_atoms(a, out, seen);
        return;
      case Kind::Ite:
        collect_atoms(t->arg(0), out, seen);
        if (t->sort == bool_sort())
        {
          collect_atoms(t->arg(1), out, seen);
          collect_atoms(t->arg(2), out, seen);
        }
        return;
      case Kind::BoolLit:
        return;
      default:
        if (t->sort == bool_sort()) out.push_back(t);
        return;
    }
  }

  inline TermVec atoms(Term t)
  {
    TermVec out;
    std::unordered_set<Term> seen;
    collect_atoms(t, out, seen);
    return out;
  }
}

#endif
