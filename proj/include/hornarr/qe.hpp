#ifndef HORNARR_QE_HPP
#define HORNARR_QE_HPP

#include "term.hpp"

#include <functional>

namespace hornarr
{
  enum class IndexMode { Infinite, Finite };

  struct QeTask
  {
    Term quantified = nullptr;  // array-sorted variable
    Term body = nullptr;        // quantifier-free
    IndexMode index_domain = IndexMode::Infinite;
  };

  // The eliminated array variable is traded for fresh value-sorted variables
  // (and, in finite-index mode, fresh index-sorted ones): the contract is
  // exists fresh . matrix == exists a . body, with a absent from matrix.
  struct QeResult
  {
    TermVec fresh_value_vars;
    TermVec fresh_index_vars;
    Term matrix = nullptr;
  };

  struct QeStats
  {
    unsigned rule_applications = 0;
    unsigned disjuncts = 0;
    std::map<std::string, unsigned> per_rule;
  };

  struct QeBudgetError : std::runtime_error
  {
    explicit QeBudgetError(const std::string& m) : std::runtime_error(m) {}
  };

  struct QeInternalError : std::logic_error
  {
    explicit QeInternalError(const std::string& m) : std::logic_error(m) {}
  };

  // Snapshot of the whole formula after one rewrite, existentially closed
  // over `bound`; every snapshot is equivalent to the original input.
  struct QeTraceEntry
  {
    TermVec bound;
    Term formula;
  };

  struct QeConfig
  {
    unsigned max_rule_applications = 200000;
    std::vector<QeTraceEntry>* trace = nullptr;
  };

  inline bool contains_array_term(Term t)
  {
    if (t->sort->kind == SortNode::Array) return true;
    for (Term a : t->args)
      if (contains_array_term(a)) return true;
    return false;
  }

  inline size_t formula_size(Term t) { return subterms(t).size(); }

  // The QE pipeline for one array variable. The hooks are the seam for
  // model-based projection: every disjunction introduced by a rewrite rule
  // passes through or_hook, fresh variables are announced together with a
  // defining term, and the Ackermann step can be swapped out.
  class QeContext
  {
   public:
    QeContext(Term a, IndexMode mode, QeStats* stats = nullptr, QeConfig cfg = {})
        : a_(a), mode_(mode), stats_(stats), cfg_(cfg)
    {
      if (a->kind != Kind::Var || a->sort->kind != SortNode::Array)
        throw std::invalid_argument("QeContext: need an array-sorted variable");
      if (a->sort->index == bool_sort()) mode_ = IndexMode::Finite;  // two-valued index
      bound_.push_back(a);
    }

    // rule-introduced disjunction -> kept as-is (QE) or resolved (MBP)
    std::function<Term(Term)> or_hook;
    // fresh variable and the term over the pre-state it stands for
    std::function<void(Term, Term)> fresh_def_hook;
    // fresh index variable witnessing distinctness of a and t outside excl
    std::function<void(Term, Term, const TermVec&)> diseq_index_hook;
    // replacement for the pairwise read consistency conjunction
    std::function<TermVec(const TermVec&, const TermVec&)> ackermann_hook;

    IndexMode mode() const { return mode_; }
    const TermVec& fresh_value_vars() const { return value_vars_; }
    const TermVec& fresh_index_vars() const { return index_vars_; }
    const TermVec& bound_vars() const { return bound_; }
    unsigned applications() const { return applications_; }

    // Fixpoint of the write-elimination rules on occurrences reachable from
    // the eliminated variable: read-over-write splitting, array equalities
    // into partial equalities, write peeling on partial equalities, and
    // orientation so writes sit on the left. Array-sorted if-then-else is
    // split on its condition for the same reason.
    Term elim_wr(Term phi)
    {
      for (;;)
      {
        Term occ = nullptr;
        for (Term t : subterms(phi))  // innermost first
        {
          if (!contains(t, a_)) continue;
          if (is_rd_over_wr(t) || is_array_eq(t) || is_peq_with_wr(t) || is_array_ite(t))
          {
            occ = t;
            break;
          }
        }
        if (!occ) return phi;
        phi = rewrite_write_occurrence(phi, occ);
        snapshot(phi);
      }
    }

    // The simultaneous (K+1)-way case split over every partial equality on
    // the eliminated variable, followed by factoring each read over it into
    // a fresh value variable with a defining conjunct.
    Term case_split_and_factor(Term phi)
    {
      TermVec peqs;
      for (Term t : subterms(phi))
        if (t->kind == Kind::Peq && contains(t, a_))
        {
          if (t->arg(0) != a_ && t->arg(1) != a_)
            throw QeInternalError("partial equality nests the eliminated variable");
          peqs.push_back(t);
        }
      if (!peqs.empty())
      {
        TermVec branches;
        TermMap all_false;
        TermVec last;
        for (Term p : peqs)
        {
          Term other = (p->arg(0) == a_) ? p->arg(1) : p->arg(0);
          Term pn = mk_peq(a_, other, peq_excl(p));
          branches.push_back(mk_and(pn, replaced(phi, p, mk_true())));
          last.push_back(mk_not(pn));
          all_false[p] = mk_false();
          count("CaseSplitEq");
        }
        last.push_back(replace(phi, all_false));
        branches.push_back(mk_and(last));
        phi = hook(mk_or(branches));
        snapshot(phi);
      }

      TermVec defs;
      for (;;)
      {
        Term occ = nullptr;
        for (Term t : subterms(phi))
          if (t->kind == Kind::Rd && t->arg(0) == a_ && !contains(t->arg(1), a_))
          {
            occ = t;
            break;
          }
        if (!occ) break;
        Term s = fresh_value(occ->sort, occ);
        phi = replaced(phi, occ, s);
        defs.push_back(mk_eq(s, occ));
        count("FactorRd");
        TermVec snap{phi};
        snap.insert(snap.end(), defs.begin(), defs.end());
        snapshot(mk_and(snap));
      }
      TermVec out{phi};
      out.insert(out.end(), defs.begin(), defs.end());
      return mk_and(out);
    }

    // Boolean rewriting into disjuncts whose trailing conjuncts are ordered
    // as: partial equalities, array disequalities, read definitions. Only
    // disjunctions still mentioning the eliminated variable are distributed;
    // cores are already free of it.
    std::vector<Term> lift_eq_diseq_rd(Term phi2)
    {
      std::vector<TermVec> combos{{}};
      TermVec shared;
      for (Term c : conjuncts(phi2))
      {
        if (c->kind == Kind::Or && contains(c, a_))
        {
          std::vector<TermVec> next;
          for (const auto& pre : combos)
            for (Term d : disjuncts(c))
            {
              TermVec e = pre;
              e.push_back(d);
              next.push_back(std::move(e));
            }
          combos = std::move(next);
        }
        else
          shared.push_back(c);
      }
      count("LiftEqDiseqRd");
      std::vector<Term> out;
      for (const auto& combo : combos)
      {
        TermVec rest, pos, neg, defs;
        auto classify = [&](Term c)
        {
          if (is_peq_on_a(c)) pos.push_back(c);
          else if (c->kind == Kind::Not && is_peq_on_a(c->arg(0))) neg.push_back(c);
          else if (is_read_def(c)) defs.push_back(c);
          else rest.push_back(c);
        };
        for (Term c : shared) classify(c);
        for (Term d : combo)
          for (Term c : conjuncts(d)) classify(c);
        TermVec delta = std::move(rest);
        delta.insert(delta.end(), pos.begin(), pos.end());
        delta.insert(delta.end(), neg.begin(), neg.end());
        delta.insert(delta.end(), defs.begin(), defs.end());
        Term d = mk_and(delta);
        if (!is_false(d)) out.push_back(d);
      }
      if (stats_) stats_->disjuncts += static_cast<unsigned>(out.size());
      return out;
    }

    // One lifted disjunct: substitute through a positive partial equality if
    // there is one; otherwise discharge the disequalities (dropped over an
    // infinite index domain, witnessed by a fresh index otherwise) and
    // Ackermannize the remaining reads. `steps` collects the formula after
    // each of the stages for trace consumers.
    Term elim_disjunct(Term delta, TermVec* steps = nullptr)
    {
      TermVec cs = conjuncts(delta);
      for (size_t k = 0; k < cs.size(); k++)
      {
        Term c = cs[k];
        if (!is_peq_on_a(c)) continue;
        Term t = (c->arg(0) == a_) ? c->arg(1) : c->arg(0);
        if (contains(t, a_))
          throw QeInternalError("substitution target contains the eliminated variable");
        Term sub = t;
        for (Term i : peq_excl(c))
          sub = mk_wr(sub, i, fresh_value(sub->sort->value, mk_rd(a_, i)));
        TermVec rest;
        for (size_t l = 0; l < cs.size(); l++)
          if (l != k) rest.push_back(cs[l]);
        count("ElimEq");
        Term r = substitute(mk_and(rest), a_, sub);
        if (steps) steps->push_back(r);
        return r;
      }

      TermVec others, defs_s, defs_t;
      std::vector<std::pair<Term, TermVec>> diseqs;
      for (Term c : cs)
      {
        if (c->kind == Kind::Not && is_peq_on_a(c->arg(0)))
        {
          Term p = c->arg(0);
          Term t = (p->arg(0) == a_) ? p->arg(1) : p->arg(0);
          if (contains(t, a_))
            throw QeInternalError("disequality target contains the eliminated variable");
          diseqs.push_back({t, peq_excl(p)});
        }
        else if (is_read_def(c))
        {
          Term rd = (c->arg(1)->kind == Kind::Rd && c->arg(1)->arg(0) == a_) ? c->arg(1)
                                                                             : c->arg(0);
          defs_s.push_back(rd == c->arg(1) ? c->arg(0) : c->arg(1));
          defs_t.push_back(rd->arg(1));
        }
        else
        {
          if (contains(c, a_))
            throw QeInternalError("unfactored occurrence of the eliminated variable");
          others.push_back(c);
        }
      }

      if (!diseqs.empty())
      {
        if (mode_ == IndexMode::Infinite)
          count("ElimDiseq");  // always satisfiable, simply dropped
        else
          for (const auto& [t, excl] : diseqs)
          {
            Term j = fresh_index(a_->sort->index, t, excl);
            for (Term i : excl) others.push_back(mk_neq(j, i));
            Term s = fresh_value(a_->sort->value, mk_rd(a_, j));
            defs_s.push_back(s);
            defs_t.push_back(j);
            others.push_back(mk_neq(s, mk_rd(t, j)));
            count("ElimDiseqFinite");
            count("FactorRd");
          }
        if (steps)
        {
          TermVec mid = others;
          for (size_t k = 0; k < defs_s.size(); k++)
            mid.push_back(mk_eq(defs_s[k], mk_rd(a_, defs_t[k])));
          steps->push_back(mk_and(mid));
        }
      }

      TermVec acks = ackermann_hook ? ackermann_hook(defs_s, defs_t)
                                    : ackermann_pairwise(defs_s, defs_t);
      count("Ackermann");
      others.insert(others.end(), acks.begin(), acks.end());
      Term r = mk_and(others);
      if (steps) steps->push_back(r);
      return r;
    }

    static TermVec ackermann_pairwise(const TermVec& ss, const TermVec& ts)
    {
      TermVec out;
      for (size_t k = 0; k < ss.size(); k++)
        for (size_t l = k + 1; l < ss.size(); l++)
          out.push_back(mk_impl(mk_eq(ts[k], ts[l]), mk_eq(ss[k], ss[l])));
      return out;
    }

    void snapshot(Term formula)
    {
      if (cfg_.trace) cfg_.trace->push_back({bound_, formula});
    }

   private:
    bool is_rd_over_wr(Term t) const
    {
      return t->kind == Kind::Rd && t->arg(0)->kind == Kind::Wr;
    }
    bool is_array_eq(Term t) const
    {
      return t->kind == Kind::Eq && t->arg(0)->sort->kind == SortNode::Array;
    }
    bool is_peq_with_wr(Term t) const
    {
      return t->kind == Kind::Peq &&
             (t->arg(0)->kind == Kind::Wr || t->arg(1)->kind == Kind::Wr);
    }
    bool is_array_ite(Term t) const
    {
      return t->kind == Kind::Ite && t->sort->kind == SortNode::Array;
    }
    bool is_peq_on_a(Term t) const
    {
      return t->kind == Kind::Peq && (t->arg(0) == a_ || t->arg(1) == a_);
    }
    bool is_read_def(Term c) const
    {
      if (c->kind != Kind::Eq) return false;
      return (c->arg(1)->kind == Kind::Rd && c->arg(1)->arg(0) == a_) ||
             (c->arg(0)->kind == Kind::Rd && c->arg(0)->arg(0) == a_);
    }

    static Term replaced(Term phi, Term occ, Term with)
    {
      TermMap m;
      m[occ] = with;
      return replace(phi, m);
    }

    Term rewrite_write_occurrence(Term phi, Term occ)
    {
      if (is_rd_over_wr(occ))
      {
        Term w = occ->arg(0), j = occ->arg(1);
        Term t = w->arg(0), i = w->arg(1), v = w->arg(2);
        count("ElimWrRd");
        return hook(mk_or(mk_and(mk_eq(i, j), replaced(phi, occ, v)),
                          mk_and(mk_neq(i, j), replaced(phi, occ, mk_rd(t, j)))));
      }
      if (is_array_eq(occ))
      {
        count("PartialEq");
        return replaced(phi, occ, mk_peq(occ->arg(0), occ->arg(1), {}));
      }
      if (is_array_ite(occ))
      {
        count("IteSplit");
        Term c = occ->arg(0);
        return hook(mk_or(mk_and(c, replaced(phi, occ, occ->arg(1))),
                          mk_and(mk_not(c), replaced(phi, occ, occ->arg(2)))));
      }
      if (occ->arg(0)->kind != Kind::Wr)
      {
        count("Symm");
        return replaced(phi, occ, mk_peq(occ->arg(1), occ->arg(0), peq_excl(occ)));
      }
      // peel one write off the left side of a partial equality
      Term w = occ->arg(0), t2 = occ->arg(1);
      Term t1 = w->arg(0), j = w->arg(1), v = w->arg(2);
      TermVec is = peq_excl(occ);
      count("ElimWrEq");
      for (Term i : is)
        if (i == j) return replaced(phi, occ, mk_peq(t1, t2, is));
      TermVec in_cases, out_cases;
      for (Term i : is)
      {
        in_cases.push_back(mk_eq(j, i));
        out_cases.push_back(mk_neq(j, i));
      }
      TermVec isj = is;
      isj.push_back(j);
      Term inner = mk_and(mk_peq(t1, t2, isj), mk_eq(v, mk_rd(t2, j)));
      Term br_in = mk_and(mk_or(in_cases), replaced(phi, occ, mk_peq(t1, t2, is)));
      Term br_out = mk_and(mk_and(out_cases), replaced(phi, occ, inner));
      return hook(mk_or(br_in, br_out));
    }

    Term hook(Term t) { return or_hook ? or_hook(t) : t; }

    Term fresh_value(Sort s, Term def)
    {
      Term v = mk_var("qe!v!" + std::to_string(value_ctr_++), s);
      value_vars_.push_back(v);
      bound_.push_back(v);
      if (fresh_def_hook) fresh_def_hook(v, def);
      return v;
    }

    Term fresh_index(Sort s, Term t, const TermVec& excl)
    {
      Term j = mk_var("qe!i!" + std::to_string(index_ctr_++), s);
      index_vars_.push_back(j);
      bound_.push_back(j);
      if (diseq_index_hook) diseq_index_hook(j, t, excl);
      return j;
    }

    void count(const std::string& rule)
    {
      applications_++;
      if (stats_)
      {
        stats_->rule_applications++;
        stats_->per_rule[rule]++;
      }
      if (applications_ > cfg_.max_rule_applications)
        throw QeBudgetError("rewrite budget of " +
                            std::to_string(cfg_.max_rule_applications) +
                            " rule applications exceeded");
    }

    Term a_;
    IndexMode mode_;
    QeStats* stats_;
    QeConfig cfg_;
    TermVec value_vars_, index_vars_, bound_;
    unsigned value_ctr_ = 0, index_ctr_ = 0, applications_ = 0;
  };

  inline QeResult array_qe(const QeTask& task, QeStats* stats = nullptr, QeConfig cfg = {})
  {
    QeContext ctx(task.quantified, task.index_domain, stats, cfg);
    Term phi = to_nnf(task.body);
    QeResult r;
    if (!contains(phi, task.quantified))
    {
      r.matrix = phi;
      return r;
    }
    Term phi1 = ctx.elim_wr(phi);
    Term phi2 = ctx.case_split_and_factor(phi1);
    std::vector<Term> deltas = ctx.lift_eq_diseq_rd(phi2);
    TermVec psis;
    for (size_t k = 0; k < deltas.size(); k++)
    {
      TermVec steps;
      Term psi = ctx.elim_disjunct(deltas[k], cfg.trace ? &steps : nullptr);
      for (Term s : steps)
      {
        TermVec mixed = psis;
        mixed.push_back(s);
        mixed.insert(mixed.end(), deltas.begin() + k + 1, deltas.end());
        ctx.snapshot(mk_or(mixed));
      }
      psis.push_back(psi);
    }
    r.matrix = mk_or(psis);
    if (contains(r.matrix, task.quantified))
      throw QeInternalError("eliminated variable survives in the result");
    r.fresh_value_vars = ctx.fresh_value_vars();
    r.fresh_index_vars = ctx.fresh_index_vars();
    return r;
  }
}

#endif
