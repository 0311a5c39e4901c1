#ifndef HORNARR_ENGINE_HPP
#define HORNARR_ENGINE_HPP

#include "chc.hpp"
#include "mbp.hpp"
#include "smt.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace hornarr
{
  // Property-directed reachability over one predicate with may- and
  // must-summaries. Level i keeps an over-approximation O_i of the states
  // with a derivation tree of depth <= i, as the conjunction of lemmas
  // stored at level >= i (O_0 is the initial condition itself). A shared
  // set of reach facts under-approximates the derivable states. Proof
  // obligations (pobs) are cubes over the state variables, discharged
  // deepest-first by:
  //   Successor   a reach fact steps into the cube: new reach fact
  //   DecideMust  predecessor through a reach fact on the call occurrence
  //   DecideMay   predecessor (or call) cube by model-based projection
  //   Conflict    no predecessor: a lemma from the unsat core, shrunk by
  //               relative induction and pushed to higher levels
  //   Leaf        a blocked cube is re-posed one level up
  // Candidate seeds pobs from bad /\ O_N, Unfold raises the bound, Safe
  // fires on a fixpoint between adjacent levels, Unsafe when a root pob is
  // reached.

  struct EngineError : std::runtime_error
  {
    explicit EngineError(const std::string& m) : std::runtime_error(m) {}
  };

  enum class Verdict
  {
    Safe,
    Unsafe,
    Unknown
  };

  struct EngineConfig
  {
    int max_depth = 30;
    bool heuristic_array_eq = false;  // strengthen pobs with array (dis)equalities
    bool heuristic_eq_res = true;     // equality resolution inside projections
    bool successor_mbp = true;        // project reach facts instead of point states
    bool validate = false;            // re-check every lemma, fact and the verdict
    std::ostream* trace = nullptr;
    unsigned max_pob_visits = 50000;
  };

  struct EngineResult
  {
    Verdict verdict = Verdict::Unknown;
    Term invariant = nullptr;  // Safe: inductive and excludes bad
    int depth = -1;            // Unsafe: bound of the refuting derivation
    std::string reason;        // Unknown
    std::map<std::string, unsigned> rule_counts;
    unsigned lemma_count = 0, fact_count = 0, pob_visits = 0;
  };

  class Spacer
  {
   public:
    Spacer(const ChcSystem& sys, Backend& be, EngineConfig cfg = {})
        : sys_(sys), be_(be), cfg_(cfg)
    {
      for (size_t k = 0; k < sys_.state_vars.size(); k++)
      {
        st2po_[sys_.state_vars[k]] = sys_.post_vars[k];
        st2ca_[sys_.state_vars[k]] = sys_.call_vars[k];
        po2st_[sys_.post_vars[k]] = sys_.state_vars[k];
        ca2st_[sys_.call_vars[k]] = sys_.state_vars[k];
      }
      aux_.insert(sys_.aux_vars.begin(), sys_.aux_vars.end());
    }

    EngineResult solve()
    {
      try
      {
        return run();
      }
      catch (const EngineError& e)
      {
        res_.verdict = Verdict::Unknown;
        res_.reason = e.what();
        return res_;
      }
      catch (const BackendError& e)
      {
        res_.verdict = Verdict::Unknown;
        res_.reason = e.what();
        return res_;
      }
    }

   private:
    struct Pob
    {
      Term cube;
      int level;
      int parent;  // index into pobs_, -1 for a root seeded from bad
      bool may;    // speculative (DecideMay/Candidate): blocked for good,
                   // never re-posed; re-derivation happens through the
                   // parent retry and Unfold
    };

    // --- instantiation: role renaming plus per-occurrence aux freshening ---

    struct Inst
    {
      Term f;
      TermVec fresh;
    };

    Inst inst(Term f, const TermMap* role = nullptr)
    {
      TermMap mp = role ? *role : TermMap{};
      Inst r;
      for (Term v : free_vars(f))
        if (aux_.count(v))
        {
          Term nv = mk_var("en!" + std::to_string(fresh_ctr_++), v->sort);
          mp[v] = nv;
          r.fresh.push_back(nv);
        }
      r.f = mp.empty() ? f : replace(f, mp);
      return r;
    }

    Term lemma_frame(int i, const TermMap* role = nullptr)
    {
      TermVec cs;
      for (auto& [l, lvl] : lemmas_)
        if (lvl >= i) cs.push_back(role ? replace(l, *role) : l);
      return mk_and(cs);
    }

    // O_i over the given occurrence; O_0 is the initial condition
    Inst frame(int i, const TermMap* role = nullptr)
    {
      if (i <= 0) return inst(sys_.init, role);
      return {lemma_frame(i, role), {}};
    }

    // init \/ reach facts, over the given occurrence; keeps the pieces so a
    // model can be attributed to the shallowest derivation that admits it
    struct ReachInst
    {
      Inst whole;
      Term init_part;
      TermVec fact_parts;
    };

    ReachInst reach(const TermMap* role = nullptr)
    {
      ReachInst r;
      r.whole = inst(sys_.init, role);
      r.init_part = r.whole.f;
      TermVec ds{r.whole.f};
      for (auto& [f, _] : facts_)
      {
        Term g = role ? replace(f, *role) : f;
        r.fact_parts.push_back(g);
        ds.push_back(g);
      }
      r.whole.f = mk_or(ds);
      return r;
    }

    // depth of the shallowest derivation the model witnesses
    int reach_depth(const ReachInst& r, const Model& m)
    {
      if (eval_bool(m, r.init_part, nullptr)) return 0;
      int best = -1;
      for (size_t k = 0; k < r.fact_parts.size(); k++)
        if (eval_bool(m, r.fact_parts[k], nullptr))
          if (best < 0 || facts_[k].second < best) best = facts_[k].second;
      if (best < 0) throw EngineError("model satisfies no reachable disjunct");
      return best;
    }

    SatResult chk(Term t)
    {
      SatResult r = be_.check(t);
      if (r.outcome == SatResult::Unknown)
        throw EngineError("solver inconclusive: " + r.reason);
      return r;
    }

    void count(const char* rule)
    {
      res_.rule_counts[rule]++;
      if (cfg_.trace) *cfg_.trace << "[" << N_ << "] " << rule << "\n";
    }

    void trace_term(const char* what, Term t)
    {
      if (cfg_.trace) *cfg_.trace << "    " << what << ": " << to_smt2(t) << "\n";
    }

    // --- model-based projection of a satisfying model onto the kept role ---

    Term project(Term body, TermVec vars, Model& m, bool point_scalars = false)
    {
      m = complete(std::move(m), free_vars(body));
      TermVec all_vars = vars;
      Term phi = model_implicant(to_nnf(body), m, nullptr);
      if (point_scalars)
      {
        TermVec arrays;
        for (Term v : vars)
        {
          if (v->sort->kind == SortNode::Array)
          {
            arrays.push_back(v);
            continue;
          }
          Value val = eval(m, v, nullptr);
          phi = substitute(phi, v, v->sort == bool_sort() ? mk_bool(val.b) : mk_int(val.i));
        }
        vars = arrays;
      }
      MbpTask t{vars, phi, IndexMode::Infinite};
      MbpConfig mc;
      mc.eq_res = cfg_.heuristic_eq_res;
      MbpOutcome out = combined_mbp(t, m, nullptr, &qe_stats_, mc);
      if (cfg_.validate)
      {
        try
        {
          if (be_.closed_nonequiv_sat({}, out.result, all_vars, body))
            throw EngineError("projection does not imply its source");
        }
        catch (const BackendError&)
        {
          // inconclusive quantified query; the projection keeps its
          // by-construction guarantee
        }
      }
      return out.result;
    }

    // --- pob bookkeeping ---

    void push_pob(Term cube, int level, int parent, bool may)
    {
      for (size_t id : active_)
        if (pobs_[id].cube == cube && pobs_[id].level == level) return;
      pobs_.push_back({cube, level, parent, may});
      active_.push_back(pobs_.size() - 1);
    }

    size_t pick_pob()
    {
      size_t best = 0;
      for (size_t k = 1; k < active_.size(); k++)
      {
        const Pob &c = pobs_[active_[k]], &b = pobs_[active_[best]];
        if (c.level < b.level || (c.level == b.level && active_[k] > active_[best])) best = k;
      }
      return best;
    }

    Term strengthen(Term cube, const Model& m, const TermVec& role_vars)
    {
      if (!cfg_.heuristic_array_eq) return cube;
      TermVec arrays;
      for (Term v : role_vars)
        if (v->sort->kind == SortNode::Array) arrays.push_back(v);
      TermVec lits = strengthen_with_array_literals(arrays, m, nullptr, true);
      if (lits.empty()) return cube;
      lits.insert(lits.begin(), cube);
      return mk_and(lits);
    }

    // --- Conflict: lemma from the unsat core, shrunk and pushed ---

    // returns the indices of p's literals named in an unsat core of
    // bg /\ lits, or nothing if the query is satisfiable
    std::optional<std::set<size_t>> core_of(Term bg, const TermVec& lits, const TermMap* role)
    {
      std::vector<std::pair<std::string, Term>> as{{"bg", bg}};
      for (size_t k = 0; k < lits.size(); k++)
        as.push_back({"c" + std::to_string(k), role ? replace(lits[k], *role) : lits[k]});
      SatResult r = be_.check(as);
      if (r.outcome == SatResult::Unknown)
        throw EngineError("solver inconclusive: " + r.reason);
      if (r.outcome == SatResult::Sat) return std::nullopt;
      std::set<size_t> out;
      for (const std::string& n : r.core)
        if (n.size() > 1 && n[0] == 'c') out.insert(std::stoul(n.substr(1)));
      return out;
    }

    Term step_background(int lvl)
    {
      TermVec parts{frame(lvl - 1).f};
      if (sys_.has_call) parts.push_back(frame(lvl - 1, &st2ca_).f);
      parts.push_back(inst(sys_.tr).f);
      return mk_and(parts);
    }

    // one step out of lemma-strengthened states cannot enter the cube
    bool blocked_after_step(Term bg, Term lemma, const TermVec& lits)
    {
      TermVec parts{bg, lemma};
      if (sys_.has_call) parts.push_back(replace(lemma, st2ca_));
      for (Term l : lits) parts.push_back(replace(l, st2po_));
      return chk(mk_and(parts)).outcome == SatResult::Unsat;
    }

    void conflict(const Pob& p)
    {
      count("Conflict");
      TermVec lits = conjuncts(p.cube);
      Term bg0 = inst(sys_.init).f;
      auto c0 = core_of(bg0, lits, nullptr);
      if (!c0) throw EngineError("conflict on a cube that intersects init");
      std::set<size_t> keep = *c0;
      Term bg1 = nullptr;
      if (p.level >= 1)
      {
        bg1 = step_background(p.level);
        auto c1 = core_of(bg1, lits, &st2po_);
        if (!c1) throw EngineError("conflict on a cube with a predecessor");
        keep.insert(c1->begin(), c1->end());
      }

      // relative induction: drop literals whose removal keeps the cube
      // unreachable from init and from its own complement
      auto subset = [&](const std::set<size_t>& ks)
      {
        TermVec out;
        for (size_t k : ks) out.push_back(lits[k]);
        return out;
      };
      for (size_t k : std::set<size_t>(keep))
      {
        if (keep.size() <= 1) break;
        std::set<size_t> trial = keep;
        trial.erase(k);
        TermVec tl = subset(trial);
        Term tc = mk_and(tl);
        if (chk(mk_and(bg0, tc)).outcome != SatResult::Unsat) continue;
        if (p.level >= 1 && !blocked_after_step(bg1, mk_not(tc), tl)) continue;
        keep = trial;
        count("Induction");
      }

      // widen point literals into half-spaces where the whole half-space is
      // just as unreachable; this is what lets frames converge on systems
      // whose invariant needs an inequality
      for (size_t k : keep)
      {
        Term lit = lits[k];
        if (lit->kind != Kind::Eq || lit->arg(0)->sort != int_sort()) continue;
        Term le = mk_le(lit->arg(0), lit->arg(1));
        Term ge = mk_le(lit->arg(1), lit->arg(0));
        for (Term wide : {le, ge})
        {
          TermVec tl;
          for (size_t j : keep) tl.push_back(j == k ? wide : lits[j]);
          Term tc = mk_and(tl);
          if (chk(mk_and(bg0, tc)).outcome != SatResult::Unsat) continue;
          if (p.level >= 1 && !blocked_after_step(bg1, mk_not(tc), tl)) continue;
          lits[k] = wide;
          count("Induction");
          break;
        }
      }

      Term lemma = mk_not(mk_and(subset(keep)));
      int lvl = p.level;
      while (lvl <= N_)
      {
        Term bg = step_background(lvl + 1);
        if (!blocked_after_step(bg, lemma, subset(keep))) break;
        lvl++;
        count("Induction");
      }
      add_lemma(lemma, lvl);
    }

    void add_lemma(Term lemma, int lvl)
    {
      if (cfg_.validate)
      {
        if (chk(mk_and(inst(sys_.init).f, mk_not(lemma))).outcome != SatResult::Unsat)
          throw EngineError("lemma not initial");
        if (lvl >= 1 &&
            !blocked_after_step(step_background(lvl), lemma, conjuncts(to_nnf(mk_not(lemma)))))
          throw EngineError("lemma not inductive at its level");
      }
      for (auto& [l, level] : lemmas_)
        if (l == lemma)
        {
          level = std::max(level, lvl);
          return;
        }
      lemmas_.push_back({lemma, lvl});
      res_.lemma_count++;
      trace_term("lemma", lemma);
    }

    // --- lemma propagation and the fixpoint test ---

    void propagate()
    {
      for (int j = 1; j <= N_; j++)
        for (auto& [l, lvl] : lemmas_)
        {
          if (lvl != j) continue;
          if (blocked_after_step(step_background(j + 1), l, conjuncts(to_nnf(mk_not(l)))))
          {
            lvl = j + 1;
            count("Induction");
          }
        }
    }

    std::optional<std::pair<Term, int>> fixpoint()
    {
      for (int i = 1; i <= N_ + 1; i++)
      {
        bool gap = true;
        for (auto& [_, lvl] : lemmas_) gap = gap && lvl != i;
        if (!gap) continue;
        Term inv = lemma_frame(i);
        if (chk(mk_and(inv, inst(sys_.bad).f)).outcome == SatResult::Unsat)
          return std::make_pair(inv, i);
      }
      return std::nullopt;
    }

    // --- pob discharge ---

    // false: a root pob is reachable, the system is unsafe
    bool process_queue()
    {
      while (!active_.empty())
      {
        if (++res_.pob_visits > cfg_.max_pob_visits)
          throw EngineError("proof obligation budget exhausted");
        size_t slot = pick_pob();
        size_t id = active_[slot];
        Pob p = pobs_[id];
        auto discharge = [&]
        { active_.erase(std::find(active_.begin(), active_.end(), id)); };

        // already inside the derivable states?
        ReachInst r0 = reach();
        Term q0 = mk_and(r0.whole.f, p.cube);
        SatResult direct = chk(q0);
        if (direct.outcome == SatResult::Sat)
        {
          if (p.parent < 0)
          {
            count("Unsafe");
            Model m = complete(std::move(direct.model), free_vars(q0));
            res_.depth = reach_depth(r0, m);
            return false;
          }
          discharge();
          continue;
        }
        if (p.level == 0)
        {
          conflict(p);
          discharge();
          if (!p.may && p.level + 1 <= N_)
          {
            count("Leaf");
            push_pob(p.cube, p.level + 1, p.parent, false);
          }
          continue;
        }

        // Successor: one concrete step from the derivable states
        {
          ReachInst rs = reach();
          TermVec parts{rs.whole.f};
          TermVec fresh = rs.whole.fresh;
          std::optional<ReachInst> rc;
          if (sys_.has_call)
          {
            rc = reach(&st2ca_);
            parts.push_back(rc->whole.f);
            fresh.insert(fresh.end(), rc->whole.fresh.begin(), rc->whole.fresh.end());
          }
          Inst tr = inst(sys_.tr);
          parts.push_back(tr.f);
          fresh.insert(fresh.end(), tr.fresh.begin(), tr.fresh.end());
          parts.push_back(replace(p.cube, st2po_));
          Term body = mk_and(parts);
          SatResult r = chk(body);
          if (r.outcome == SatResult::Sat)
          {
            count("Successor");
            TermVec vars = sys_.state_vars;
            if (sys_.has_call) vars.insert(vars.end(), sys_.call_vars.begin(), sys_.call_vars.end());
            vars.insert(vars.end(), fresh.begin(), fresh.end());
            Model m = std::move(r.model);
            Term img = project(body, vars, m, !cfg_.successor_mbp);
            int d = reach_depth(rs, m);
            if (rc) d = std::max(d, reach_depth(*rc, m));
            Term fact = replace(img, po2st_);
            facts_.push_back({fact, d + 1});
            res_.fact_count++;
            trace_term("fact", fact);
            if (p.parent < 0)
            {
              count("Unsafe");
              res_.depth = d + 1;
              return false;
            }
            discharge();
            continue;
          }
        }

        // DecideMust: predecessor whose call occurrence is already derivable
        bool spawned = false;
        if (sys_.has_call)
        {
          Inst om = frame(p.level - 1);
          ReachInst rc = reach(&st2ca_);
          Inst tr = inst(sys_.tr);
          Term body = mk_and({om.f, rc.whole.f, tr.f, replace(p.cube, st2po_)});
          SatResult r = chk(body);
          if (r.outcome == SatResult::Sat)
          {
            count("DecideMust");
            // the frame only filters the model; project the step itself so
            // the cube stays a local fact about the transition
            Term local = mk_and({rc.whole.f, tr.f, replace(p.cube, st2po_)});
            TermVec vars = sys_.call_vars;
            vars.insert(vars.end(), sys_.post_vars.begin(), sys_.post_vars.end());
            vars.insert(vars.end(), rc.whole.fresh.begin(), rc.whole.fresh.end());
            vars.insert(vars.end(), tr.fresh.begin(), tr.fresh.end());
            Model m = r.model;
            Term pre = strengthen(project(local, vars, m, false), m, sys_.state_vars);
            push_pob(pre, p.level - 1, static_cast<int>(id), false);
            trace_term("pob", pre);
            spawned = true;
          }
        }

        // DecideMay: predecessor cube (or call cube) under the may summary
        if (!spawned)
        {
          Inst om = frame(p.level - 1);
          Inst tr = inst(sys_.tr);
          TermVec parts{om.f, tr.f};
          if (sys_.has_call) parts.push_back(frame(p.level - 1, &st2ca_).f);
          parts.push_back(replace(p.cube, st2po_));
          Term body = mk_and(parts);
          SatResult r = chk(body);
          if (r.outcome == SatResult::Sat)
          {
            count("DecideMay");
            Model m = r.model;
            Term local = mk_and(tr.f, replace(p.cube, st2po_));
            Term cube;
            if (sys_.has_call)
            {
              // the call occurrence is the open branch of the derivation:
              // pose it as the next obligation
              TermVec vars = sys_.state_vars;
              vars.insert(vars.end(), sys_.post_vars.begin(), sys_.post_vars.end());
              vars.insert(vars.end(), tr.fresh.begin(), tr.fresh.end());
              cube = replace(strengthen(project(local, vars, m, false), m, sys_.call_vars),
                             ca2st_);
            }
            else
            {
              TermVec vars = sys_.post_vars;
              vars.insert(vars.end(), tr.fresh.begin(), tr.fresh.end());
              cube = strengthen(project(local, vars, m, false), m, sys_.state_vars);
            }
            push_pob(cube, p.level - 1, static_cast<int>(id), true);
            trace_term("pob", cube);
            spawned = true;
          }
        }

        if (!spawned)
        {
          conflict(p);
          discharge();
          if (!p.may && p.level + 1 <= N_)
          {
            count("Leaf");
            push_pob(p.cube, p.level + 1, p.parent, false);
          }
        }
      }
      return true;
    }

    // --- the main loop ---

    EngineResult run()
    {
      for (N_ = 0; N_ <= cfg_.max_depth; N_++)
      {
        count("Unfold");
        while (true)
        {
          Inst b = inst(sys_.bad);
          Inst on = frame(N_);
          Term q = mk_and(on.f, b.f);
          SatResult r = chk(q);
          if (r.outcome == SatResult::Unsat) break;
          count("Candidate");
          Model m = r.model;
          Term cube = strengthen(project(b.f, b.fresh, m, false), m, sys_.state_vars);
          trace_term("pob", cube);
          push_pob(cube, N_, -1, true);
          if (!process_queue())
          {
            res_.verdict = Verdict::Unsafe;
            return res_;
          }
        }
        propagate();
        if (auto fp = fixpoint())
        {
          count("Safe");
          res_.verdict = Verdict::Safe;
          res_.invariant = fp->first;
          res_.depth = fp->second;
          if (cfg_.validate) validate_invariant(fp->first);
          return res_;
        }
      }
      res_.verdict = Verdict::Unknown;
      res_.reason = "bound exhausted at depth " + std::to_string(cfg_.max_depth);
      return res_;
    }

    void validate_invariant(Term inv)
    {
      if (chk(mk_and(inst(sys_.init).f, mk_not(inv))).outcome != SatResult::Unsat)
        throw EngineError("invariant does not cover init");
      TermVec parts{inv, inst(sys_.tr).f, mk_not(replace(inv, st2po_))};
      if (sys_.has_call) parts.push_back(replace(inv, st2ca_));
      if (chk(mk_and(parts)).outcome != SatResult::Unsat)
        throw EngineError("invariant is not inductive");
      if (chk(mk_and(inv, inst(sys_.bad).f)).outcome != SatResult::Unsat)
        throw EngineError("invariant does not exclude bad");
    }

    ChcSystem sys_;
    Backend& be_;
    EngineConfig cfg_;
    EngineResult res_;
    QeStats qe_stats_;
    TermMap st2po_, st2ca_, po2st_, ca2st_;
    std::unordered_set<Term> aux_;
    std::vector<std::pair<Term, int>> lemmas_;  // formula over state vars, level
    std::vector<std::pair<Term, int>> facts_;   // reachable cube, derivation depth
    std::vector<Pob> pobs_;
    std::vector<size_t> active_;
    unsigned fresh_ctr_ = 0;
    int N_ = 0;
  };

  inline EngineResult solve_chc(const ChcSystem& sys, Backend& be, EngineConfig cfg = {})
  {
    return Spacer(sys, be, cfg).solve();
  }
}

#endif
