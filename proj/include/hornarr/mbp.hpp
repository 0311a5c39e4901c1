#ifndef HORNARR_MBP_HPP
#define HORNARR_MBP_HPP

#include "model.hpp"
#include "qe.hpp"

#include <numeric>

namespace hornarr
{
  // Model-based projection: given M |= body, project the listed variables
  // out so that M |= result and result => exists vars . body. The array
  // part reuses the QE pipeline but resolves every rule-introduced
  // disjunction under M, which keeps the output linear in the input instead
  // of exponential in the number of partial equalities.

  struct MbpError : std::runtime_error
  {
    explicit MbpError(const std::string& m) : std::runtime_error(m) {}
  };

  // --- linear decomposition of integer terms ---

  struct Lin
  {
    std::map<Term, int64_t> coef;  // atom -> coefficient
    int64_t k = 0;
  };

  inline void lin_acc(Term t, int64_t mult, Lin& out)
  {
    switch (t->kind)
    {
      case Kind::IntLit: out.k += mult * t->num; return;
      case Kind::Add:
        for (Term a : t->args) lin_acc(a, mult, out);
        return;
      case Kind::Neg: lin_acc(t->arg(0), -mult, out); return;
      case Kind::Mul: lin_acc(t->arg(0), mult * t->num, out); return;
      default: out.coef[t] += mult; return;
    }
  }

  inline Lin linearize(Term t)
  {
    Lin l;
    lin_acc(t, 1, l);
    for (auto it = l.coef.begin(); it != l.coef.end();)
      it = (it->second == 0) ? l.coef.erase(it) : std::next(it);
    return l;
  }

  inline Term lin_term(const Lin& l)
  {
    TermVec parts;
    for (auto& [a, c] : l.coef)
      if (c != 0) parts.push_back(mk_mul(c, a));
    if (l.k != 0 || parts.empty()) parts.push_back(mk_int(l.k));
    return mk_add(parts);
  }

  // x occurs under an uninterpreted atom (read index, exclusion list, ...)
  inline bool occurs_nonlinearly(const Lin& l, Term x)
  {
    for (auto& [a, _] : l.coef)
      if (a != x && contains(a, x)) return true;
    return false;
  }

  // --- implicant selection: pick the disjuncts that hold in the model ---

  inline Term model_implicant(Term phi, const Model& m, const IndexDomain* dom)
  {
    switch (phi->kind)
    {
      case Kind::And:
      {
        TermVec cs;
        for (Term c : phi->args) cs.push_back(model_implicant(c, m, dom));
        return mk_and(cs);
      }
      case Kind::Or:
        for (Term d : phi->args)
          if (eval_bool(m, d, dom)) return model_implicant(d, m, dom);
        throw MbpError("no disjunct holds in the model: " + to_smt2(phi));
      case Kind::Ite:
        if (phi->sort != bool_sort()) return phi;
        return eval_bool(m, phi->arg(0), dom)
                   ? mk_and(phi->arg(0), model_implicant(phi->arg(1), m, dom))
                   : mk_and(mk_not(phi->arg(0)), model_implicant(phi->arg(2), m, dom));
      default: return phi;
    }
  }

  // --- projection of one integer variable from a cube of literals ---

  // Virtual substitution guided by the model: x is replaced by the tightest
  // lower bound under M plus a residue that keeps every divisibility literal
  // truthful; with no lower bounds the least upper bound is used from above,
  // and with bounds of neither kind the residue of the model value itself.
  // Literals where x has coefficient other than +-1, sits under an
  // uninterpreted atom, or under a negated divisibility get the model value
  // substituted instead, which forces the same on every other literal.
  inline Term lia_mbp_var(const TermVec& lits, Term x, const Model& m, const IndexDomain* dom,
                          bool* model_fallback)
  {
    TermVec keep, with_x;
    for (Term c : lits)
      (contains(c, x) ? with_x : keep).push_back(c);
    if (with_x.empty()) return mk_and(keep);

    struct Bound { Term t; int64_t val; };                // x >= t or x <= t
    std::vector<Bound> lower, upper;
    std::vector<std::pair<int64_t, Lin>> divs;            // d | x + r
    int64_t xval = eval(m, x, dom).i;
    bool fallback = false;

    auto classify = [&](Term c) -> bool
    {
      bool negated = c->kind == Kind::Not;
      Term at = negated ? c->arg(0) : c;
      if (at->kind == Kind::Divides)
      {
        Lin l = linearize(at->arg(0));
        auto it = l.coef.find(x);
        if (negated || it == l.coef.end() || std::abs(it->second) != 1 ||
            occurs_nonlinearly(l, x))
          return false;
        if (it->second < 0)  // d | -x+r is d | x-r
        {
          for (auto& [_, cc] : l.coef) cc = -cc;
          l.k = -l.k;
        }
        l.coef.erase(l.coef.find(x));
        divs.push_back({at->num, l});
        return true;
      }
      if (at->kind != Kind::Lt && at->kind != Kind::Le && at->kind != Kind::Eq) return false;
      if (at->arg(0)->sort != int_sort()) return false;
      // as  lhs - rhs <op> 0
      Lin l = linearize(at->arg(0));
      lin_acc(at->arg(1), -1, l);
      for (auto it = l.coef.begin(); it != l.coef.end();)
        it = (it->second == 0) ? l.coef.erase(it) : std::next(it);
      auto it = l.coef.find(x);
      if (it == l.coef.end() || std::abs(it->second) != 1 || occurs_nonlinearly(l, x))
        return false;
      int64_t cx = it->second;
      l.coef.erase(it);
      // normalize to  x + r <op'> 0, flipping the relation when cx = -1
      bool flip = cx < 0;
      if (flip)
      {
        for (auto& [_, cc] : l.coef) cc = -cc;
        l.k = -l.k;
      }
      Lin nr = l;  // -r, the bound side
      for (auto& [_, cc] : nr.coef) cc = -cc;
      nr.k = -nr.k;
      int64_t nrval = nr.k;
      for (auto& [a, cc] : nr.coef) nrval += cc * eval(m, a, dom).i;
      auto bound = [&](bool low, int64_t off)
      {
        Lin b = nr;
        b.k += off;
        Term bt = lin_term(b);
        (low ? lower : upper).push_back({bt, nrval + off});
      };
      if (at->kind == Kind::Eq && !negated)
      {
        bound(true, 0);
        bound(false, 0);
      }
      else if (at->kind == Kind::Eq)
      {
        // x != -r: strengthen to the side the model picked
        xval > nrval ? bound(true, 1) : bound(false, -1);
      }
      else
      {
        // x + r < 0 is an upper bound; the flipped x + r > 0 a lower one
        int64_t off = (at->kind == Kind::Lt) ? 1 : 0;
        flip ? bound(true, off) : bound(false, -off);
      }
      return true;
    };

    for (Term c : with_x)
      if (!classify(c)) { fallback = true; break; }

    Term w;  // the witness term substituted for x
    if (fallback)
    {
      if (model_fallback) *model_fallback = true;
      w = mk_int(xval);
    }
    else
    {
      int64_t d = 1;
      for (auto& [n, _] : divs) d = std::lcm(d, n);
      auto residue = [&](int64_t delta) { return ((delta % d) + d) % d; };
      if (!lower.empty())
      {
        const Bound* best = &lower[0];
        for (const Bound& b : lower)
          if (b.val > best->val) best = &b;
        w = mk_add(best->t, mk_int(residue(xval - best->val)));
      }
      else if (!upper.empty())
      {
        const Bound* best = &upper[0];
        for (const Bound& b : upper)
          if (b.val < best->val) best = &b;
        w = mk_add(best->t, mk_neg(mk_int(residue(best->val - xval))));
      }
      else
        w = mk_int(divs.empty() ? xval : residue(xval));
    }

    TermVec out = keep;
    for (Term c : with_x)
    {
      Term s = substitute(c, x, w);
      if (!is_true(s)) out.push_back(s);
    }
    return mk_and(out);
  }

  // Projects the integer variables one at a time; booleans are fixed to
  // their model value. phi need not be a cube: the disjuncts the model
  // rejects are discarded first.
  inline Term lia_mbp(Term phi, const TermVec& xs, const Model& m, const IndexDomain* dom,
                      bool* model_fallback = nullptr)
  {
    phi = model_implicant(to_nnf(phi), m, dom);
    for (Term x : xs)
    {
      if (!contains(phi, x)) continue;
      if (x->sort == bool_sort())
      {
        phi = substitute(phi, x, mk_bool(eval(m, x, dom).b));
        continue;
      }
      if (x->sort != int_sort()) throw MbpError("lia_mbp: not an arithmetic variable");
      phi = lia_mbp_var(conjuncts(phi), x, m, dom, model_fallback);
    }
    return phi;
  }

  // --- cheap exact pass: resolve x = t conjuncts by substitution ---

  // Removes from `vars` every variable defined by a top-level equality whose
  // other side is free of all the variables being eliminated, substituting
  // it away. Equality resolution is exact, so it never costs precision.
  inline Term equality_resolution_prepass(Term phi, TermVec& vars)
  {
    bool changed = true;
    while (changed)
    {
      changed = false;
      for (size_t k = 0; k < vars.size(); k++)
      {
        Term x = vars[k];
        for (Term c : conjuncts(phi))
        {
          if (c->kind != Kind::Eq) continue;
          Term t = nullptr;
          if (c->arg(0) == x) t = c->arg(1);
          else if (c->arg(1) == x) t = c->arg(0);
          if (!t) continue;
          bool clean = true;
          for (Term y : vars) clean = clean && !contains(t, y);
          if (!clean) continue;
          phi = substitute(phi, x, t);
          vars.erase(vars.begin() + k);
          changed = true;
          break;
        }
        if (changed) break;
      }
    }
    return phi;
  }

  // --- array projection via the QE pipeline with model-guided hooks ---

  struct ArrayMbpResult
  {
    Term matrix = nullptr;  // free of the array variable
    TermVec fresh_vars;     // extend the model; still to be projected
  };

  inline ArrayMbpResult array_mbp(Term a, Term body, IndexMode mode, Model& m,
                                  const IndexDomain* dom = nullptr, QeStats* stats = nullptr,
                                  QeConfig cfg = {})
  {
    QeContext ctx(a, mode, stats, cfg);
    ctx.or_hook = [&](Term t)
    {
      if (t->kind != Kind::Or) return t;
      for (Term d : t->args)
        if (eval_bool(m, d, dom))
        {
          if (stats) stats->per_rule["MbpResolve"]++;
          return d;
        }
      return t;  // enclosing context is false in the model; keep both sides
    };
    ctx.fresh_def_hook = [&](Term v, Term def) { m.set(v, eval(m, def, dom)); };
    ctx.diseq_index_hook = [&](Term j, Term t, const TermVec& excl)
    {
      std::vector<Value> cands;
      if (j->sort == bool_sort())
        cands = {Value::of_bool(false), Value::of_bool(true)};
      else if (dom)
        for (int64_t i : dom->ints) cands.push_back(Value::of_int(i));
      else
        throw MbpError("finite-index projection needs an index domain");
      std::vector<Value> excl_vals;
      for (Term e : excl) excl_vals.push_back(eval(m, e, dom));
      Value av = eval(m, a, dom), tv = eval(m, t, dom);
      const Value* pick = nullptr;
      for (const Value& c : cands)
      {
        bool excluded = false;
        for (const Value& e : excl_vals) excluded = excluded || e == c;
        if (excluded) continue;
        if (!pick) pick = &c;  // fallback for branches false in the model
        if (av.arr->at(c) != tv.arr->at(c))
        {
          pick = &c;
          break;
        }
      }
      m.set(j, pick ? *pick : cands[0]);
    };
    ctx.ackermann_hook = [&](const TermVec& ss, const TermVec& ts) -> TermVec
    {
      if (ts.size() < 2) return {};
      if (ts[0]->sort != int_sort()) return QeContext::ackermann_pairwise(ss, ts);
      // group the index terms by model value: equalities within a class,
      // a strict chain between class representatives
      std::map<int64_t, std::vector<size_t>> classes;
      for (size_t k = 0; k < ts.size(); k++) classes[eval(m, ts[k], dom).i].push_back(k);
      TermVec out;
      size_t prev = ts.size();
      for (auto& [_, members] : classes)
      {
        size_t rep = members[0];
        for (size_t l = 1; l < members.size(); l++)
        {
          out.push_back(mk_eq(ts[members[l]], ts[rep]));
          out.push_back(mk_eq(ss[members[l]], ss[rep]));
        }
        if (prev != ts.size()) out.push_back(mk_lt(ts[prev], ts[rep]));
        prev = rep;
      }
      return out;
    };

    Term phi = to_nnf(body);
    ArrayMbpResult r;
    if (!contains(phi, a))
    {
      r.matrix = phi;
      return r;
    }
    phi = ctx.elim_wr(phi);
    phi = ctx.case_split_and_factor(phi);
    std::vector<Term> deltas = ctx.lift_eq_diseq_rd(phi);
    TermVec psis;
    for (Term d : deltas) psis.push_back(ctx.elim_disjunct(d));
    r.matrix = mk_or(psis);
    if (contains(r.matrix, a)) throw MbpError("array variable survives projection");
    r.fresh_vars = ctx.fresh_value_vars();
    r.fresh_vars.insert(r.fresh_vars.end(), ctx.fresh_index_vars().begin(),
                        ctx.fresh_index_vars().end());
    return r;
  }

  // --- the combined projection used by the solver engine ---

  struct MbpTask
  {
    TermVec vars;  // mixed sorts; arrays go first internally
    Term body = nullptr;
    IndexMode index_domain = IndexMode::Infinite;
  };

  struct MbpConfig
  {
    bool eq_res = true;  // equality resolution prepass
    QeConfig qe;
  };

  struct MbpOutcome
  {
    Term result = nullptr;
    bool used_substitution = false;  // an array was eliminated by substitution
    bool model_fallback = false;     // some literal got a raw model value
    TermVec strengthening_literals;  // optional extras picked under the model
  };

  inline MbpOutcome combined_mbp(const MbpTask& task, Model& m,
                                 const IndexDomain* dom = nullptr, QeStats* stats = nullptr,
                                 MbpConfig cfg = {})
  {
    MbpOutcome out;
    Term phi = to_nnf(task.body);
    TermVec vars = task.vars;
    if (cfg.eq_res)
    {
      size_t before = vars.size();
      phi = equality_resolution_prepass(phi, vars);
      out.used_substitution = vars.size() < before;
    }

    TermVec ints, bools;
    for (Term v : vars)
    {
      if (v->sort->kind != SortNode::Array)
      {
        (v->sort == bool_sort() ? bools : ints).push_back(v);
        continue;
      }
      unsigned eq_before = stats ? stats->per_rule["ElimEq"] : 0;
      ArrayMbpResult r = array_mbp(v, phi, task.index_domain, m, dom, stats, cfg.qe);
      if (stats && stats->per_rule["ElimEq"] > eq_before) out.used_substitution = true;
      phi = r.matrix;
      for (Term f : r.fresh_vars) (f->sort == bool_sort() ? bools : ints).push_back(f);
    }

    for (Term b : bools)
      if (contains(phi, b)) phi = substitute(phi, b, mk_bool(eval(m, b, dom).b));
    phi = lia_mbp(phi, ints, m, dom, &out.model_fallback);

    for (Term v : task.vars)
      if (contains(phi, v)) throw MbpError("variable survives combined projection");
    out.result = phi;
    return out;
  }

  // Optional strengthening: whole-array (dis)equalities that happen to hold
  // in the model. Conjoining them to a projected cube focuses the search on
  // candidate invariants that relate arrays pointwise.
  inline TermVec strengthen_with_array_literals(const TermVec& arrays, const Model& m,
                                                const IndexDomain* dom = nullptr,
                                                bool include_disequalities = false)
  {
    TermVec lits;
    for (size_t k = 0; k < arrays.size(); k++)
      for (size_t l = k + 1; l < arrays.size(); l++)
      {
        if (arrays[k]->sort != arrays[l]->sort) continue;
        if (eval(m, arrays[k], dom) == eval(m, arrays[l], dom))
          lits.push_back(mk_eq(arrays[k], arrays[l]));
        else if (include_disequalities)
          lits.push_back(mk_not(mk_eq(arrays[k], arrays[l])));
      }
    return lits;
  }
}

#endif
