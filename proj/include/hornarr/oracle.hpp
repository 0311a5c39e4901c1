#ifndef HORNARR_ORACLE_HPP
#define HORNARR_ORACLE_HPP

#include "chc.hpp"
#include "mbp.hpp"
#include "model.hpp"
#include "qe.hpp"
#include "smt.hpp"

#include <functional>
#include <random>
#include <sstream>

namespace hornarr
{
  // Finite structures for brute-force checking: arrays are all functions
  // from the index domain to the value domain, integers range over the
  // given sets. Kept tiny on purpose; everything here is exponential.
  struct FiniteDomainSpec
  {
    std::vector<int64_t> index_dom;
    std::vector<int64_t> value_dom;
  };

  struct OracleError : std::runtime_error
  {
    explicit OracleError(const std::string& m) : std::runtime_error(m) {}
  };

  inline std::vector<Value> int_universe(const std::vector<int64_t>& dom)
  {
    std::vector<Value> out;
    for (int64_t v : dom) out.push_back(Value::of_int(v));
    return out;
  }

  // Every value of the sort: index-role ints range over the index domain,
  // the rest over the value domain, free ints over the union.
  enum class DomainRole { Index, Value, Free };

  inline std::vector<Value> universe(Sort s, const FiniteDomainSpec& spec, DomainRole role)
  {
    switch (s->kind)
    {
      case SortNode::Bool: return {Value::of_bool(false), Value::of_bool(true)};
      case SortNode::Int:
      {
        if (role == DomainRole::Index) return int_universe(spec.index_dom);
        if (role == DomainRole::Value) return int_universe(spec.value_dom);
        std::vector<int64_t> u = spec.index_dom;
        u.insert(u.end(), spec.value_dom.begin(), spec.value_dom.end());
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        return int_universe(u);
      }
      default:
      {
        std::vector<Value> is = universe(s->index, spec, DomainRole::Index);
        std::vector<Value> vs = universe(s->value, spec, DomainRole::Value);
        if (is.size() > 4 || vs.size() > 5)
          throw OracleError("array universe too large to enumerate");
        std::vector<Value> out;
        std::vector<size_t> ctr(is.size(), 0);
        for (;;)
        {
          std::map<Value, Value> graph;
          for (size_t k = 0; k < is.size(); k++) graph[is[k]] = vs[ctr[k]];
          out.push_back(mk_array_value(s, vs[0], std::move(graph)));
          size_t k = 0;
          for (; k < is.size(); k++)
          {
            if (++ctr[k] < vs.size()) break;
            ctr[k] = 0;
          }
          if (k == is.size()) break;
        }
        return out;
      }
    }
  }

  using EnumVars = std::vector<std::pair<Term, std::vector<Value>>>;

  // exists evars . phi under the partial model m, with early exit
  inline bool eval_exists(Term phi, const EnumVars& evars, Model& m, const IndexDomain* dom,
                          size_t k = 0)
  {
    if (k == evars.size()) return eval_bool(m, phi, dom);
    for (const Value& v : evars[k].second)
    {
      m.set(evars[k].first, v);
      if (eval_exists(phi, evars, m, dom, k + 1)) return true;
    }
    return false;
  }

  struct TruthTable
  {
    TermVec vars;  // free variables, in enumeration order
    std::vector<std::pair<std::vector<Value>, bool>> rows;
  };

  namespace detail
  {
    template <typename F>
    inline void for_each_assignment(const EnumVars& fvars, Model& m, std::vector<Value>& row,
                                    size_t k, F&& f)
    {
      if (k == fvars.size())
      {
        f(row);
        return;
      }
      for (const Value& v : fvars[k].second)
      {
        m.set(fvars[k].first, v);
        row.push_back(v);
        for_each_assignment(fvars, m, row, k + 1, f);
        row.pop_back();
      }
    }
  }

  // Variables that occur in an index position (read/write index or a
  // partial-equality exclusion list) must range over the index domain;
  // enumerating them over anything wider would reach indices the array
  // universe says nothing about.
  inline void collect_index_vars(Term t, std::unordered_set<Term>& out)
  {
    if (t->kind == Kind::Rd || t->kind == Kind::Wr)
      for (Term v : free_vars(t->arg(1))) out.insert(v);
    if (t->kind == Kind::Peq)
      for (Term i : peq_excl(t))
        for (Term v : free_vars(i)) out.insert(v);
    for (Term a : t->args) collect_index_vars(a, out);
  }

  inline EnumVars free_enum_vars(const TermVec& vars, const FiniteDomainSpec& spec,
                                 const std::unordered_set<Term>& index_vars)
  {
    EnumVars out;
    for (Term v : vars)
      out.push_back({v, universe(v->sort, spec,
                                 index_vars.count(v) ? DomainRole::Index : DomainRole::Free)});
    return out;
  }

  // Truth table of exists quantified . body over all finite assignments of
  // the remaining free variables.
  inline TruthTable brute_qe(const QeTask& task, const FiniteDomainSpec& spec)
  {
    TruthTable tbl;
    for (Term v : free_vars(task.body))
      if (v != task.quantified) tbl.vars.push_back(v);
    std::unordered_set<Term> ivs;
    collect_index_vars(task.body, ivs);
    EnumVars fvars = free_enum_vars(tbl.vars, spec, ivs);
    EnumVars evars{{task.quantified, universe(task.quantified->sort, spec, DomainRole::Free)}};
    IndexDomain dom{spec.index_dom};
    Model m;
    std::vector<Value> row;
    detail::for_each_assignment(fvars, m, row, 0, [&](const std::vector<Value>& r)
    {
      tbl.rows.push_back({r, eval_exists(task.body, evars, m, &dom)});
    });
    return tbl;
  }

  inline std::string show_value(const Value& v)
  {
    switch (v.sort->kind)
    {
      case SortNode::Int: return std::to_string(v.i);
      case SortNode::Bool: return v.b ? "true" : "false";
      default:
      {
        std::string s = "[dflt " + show_value(v.arr->dflt);
        for (auto& kv : v.arr->graph)
          s += " " + show_value(kv.first) + ":" + show_value(kv.second);
        return s + "]";
      }
    }
  }

  inline bool is_fresh(const QeResult& r, Term v)
  {
    for (Term x : r.fresh_value_vars)
      if (x == v) return true;
    for (Term x : r.fresh_index_vars)
      if (x == v) return true;
    return false;
  }

  // Pointwise comparison of exists a . body against exists fresh . matrix
  // over the finite structure. Empty return means agreement; otherwise a
  // diagnostic naming the first differing assignment.
  inline std::string compare_qe_with_brute(const QeTask& task, const QeResult& result,
                                           const FiniteDomainSpec& spec)
  {
    TermVec fvars_list;
    {
      std::unordered_set<Term> seen;
      for (Term v : free_vars(TermVec{task.body, result.matrix}))
        if (v != task.quantified && !is_fresh(result, v) && seen.insert(v).second)
          fvars_list.push_back(v);
    }
    std::unordered_set<Term> ivs;
    collect_index_vars(task.body, ivs);
    collect_index_vars(result.matrix, ivs);
    EnumVars fvars = free_enum_vars(fvars_list, spec, ivs);
    EnumVars body_evars{
        {task.quantified, universe(task.quantified->sort, spec, DomainRole::Free)}};

    // per disjunct, only the fresh variables it mentions are enumerated;
    // fresh variables pinned by a top-level equality are propagated instead
    // of enumerated (elimination defines most of them that way)
    std::unordered_set<Term> idx_set(result.fresh_index_vars.begin(),
                                     result.fresh_index_vars.end());
    struct Def
    {
      Term var, rhs;
      TermVec rhs_vars;
    };
    struct Part
    {
      Term d;
      TermVec fresh;
      std::vector<Def> defs;
    };
    std::vector<Part> parts;
    for (Term d : disjuncts(result.matrix))
    {
      Part p{d, {}, {}};
      for (Term v : free_vars(d))
        if (is_fresh(result, v)) p.fresh.push_back(v);
      for (Term lit : conjuncts(d))
      {
        if (lit->kind != Kind::Eq) continue;
        for (int k = 0; k < 2; k++)
        {
          Term v = lit->arg(k), t = lit->arg(1 - k);
          if (v->kind == Kind::Var && is_fresh(result, v))
            p.defs.push_back({v, t, free_vars(t)});
        }
      }
      parts.push_back(std::move(p));
    }

    IndexDomain dom{spec.index_dom};
    Model m;
    std::vector<Value> row;
    std::string diag;
    std::unordered_map<Term, TermVec> vcache;
    auto vars_of = [&](Term t) -> const TermVec&
    {
      auto it = vcache.find(t);
      if (it == vcache.end()) it = vcache.emplace(t, free_vars(t)).first;
      return it->second;
    };
    // three-valued evaluation: 1 true, 0 false, -1 blocked on an unassigned
    // fresh variable; branching only where the connectives cannot decide
    std::function<int(Term)> eval3 = [&](Term t) -> int
    {
      switch (t->kind)
      {
        case Kind::And:
        {
          int acc = 1;
          for (Term a : t->args)
          {
            int r = eval3(a);
            if (r == 0) return 0;
            if (r < 0) acc = -1;
          }
          return acc;
        }
        case Kind::Or:
        {
          int acc = 0;
          for (Term a : t->args)
          {
            int r = eval3(a);
            if (r == 1) return 1;
            if (r < 0) acc = -1;
          }
          return acc;
        }
        case Kind::Not:
        {
          int r = eval3(t->arg(0));
          return r < 0 ? -1 : 1 - r;
        }
        default:
        {
          for (Term v : vars_of(t))
            if (!m.has(v)) return -1;
          return eval_bool(m, t, &dom) ? 1 : 0;
        }
      }
    };
    std::function<bool(Term)> sat_exists = [&](Term t) -> bool
    {
      int tv = eval3(t);
      if (tv >= 0) return tv == 1;
      Term v = nullptr;
      for (Term x : vars_of(t))
        if (!m.has(x))
        {
          v = x;
          break;
        }
      for (const Value& val :
           universe(v->sort, spec, idx_set.count(v) ? DomainRole::Index : DomainRole::Value))
      {
        m.set(v, val);
        if (sat_exists(t))
        {
          m.assignment.erase(v);
          return true;
        }
      }
      m.assignment.erase(v);
      return false;
    };
    auto sat_part = [&](const Part& p) -> bool
    {
      for (Term v : p.fresh) m.assignment.erase(v);
      bool progress = true;
      while (progress)
      {
        progress = false;
        for (const Def& def : p.defs)
        {
          if (m.has(def.var)) continue;
          bool ready = true;
          for (Term v : def.rhs_vars) ready = ready && m.has(v);
          if (!ready) continue;
          m.set(def.var, eval(m, def.rhs, &dom));
          progress = true;
        }
      }
      bool ok = sat_exists(p.d);
      for (Term v : p.fresh) m.assignment.erase(v);
      return ok;
    };
    detail::for_each_assignment(fvars, m, row, 0, [&](const std::vector<Value>& r)
    {
      if (!diag.empty()) return;
      bool lhs = eval_exists(task.body, body_evars, m, &dom);
      bool rhs = false;
      for (const Part& p : parts)
        if (sat_part(p))
        {
          rhs = true;
          break;
        }
      if (lhs != rhs)
      {
        std::ostringstream os;
        os << "mismatch (body " << (lhs ? "true" : "false") << ", matrix "
           << (rhs ? "true" : "false") << ") at";
        for (size_t k = 0; k < fvars_list.size(); k++)
          os << " " << fvars_list[k]->name << "=" << show_value(r[k]);
        diag = os.str();
      }
    });
    return diag;
  }

  // Exhaustive check of the projection contract: every model of the body
  // over the finite structure is projected, each projection must hold in
  // its model and imply the existential closure, and together the
  // projections must cover it exactly. Empty diag means all of that held.
  struct MbpEnumeration
  {
    unsigned models = 0;
    TermVec projections;
    std::string diag;
  };

  inline MbpEnumeration mbp_enumerate(const QeTask& task, const FiniteDomainSpec& spec,
                                      QeStats* stats = nullptr, MbpConfig cfg = {})
  {
    MbpEnumeration out;
    TermVec fvars_list;
    for (Term v : free_vars(task.body))
      if (v != task.quantified) fvars_list.push_back(v);
    std::unordered_set<Term> ivs;
    collect_index_vars(task.body, ivs);
    EnumVars fvars = free_enum_vars(fvars_list, spec, ivs);
    std::vector<Value> auniv = universe(task.quantified->sort, spec, DomainRole::Free);
    // integer projections may pick witnesses just outside the value domain
    // (the least violation of a strict bound); give the closure check room
    FiniteDomainSpec ext = spec;
    ext.value_dom.insert(ext.value_dom.begin(),
                         *std::min_element(spec.value_dom.begin(), spec.value_dom.end()) - 1);
    ext.value_dom.push_back(*std::max_element(spec.value_dom.begin(), spec.value_dom.end()) +
                            1);
    std::vector<Value> auniv_ext = universe(task.quantified->sort, ext, DomainRole::Free);
    IndexDomain dom{spec.index_dom};
    const IndexDomain* dp = task.index_domain == IndexMode::Finite ? &dom : nullptr;

    Model m;
    std::vector<Value> row;
    std::unordered_set<Term> seen;
    detail::for_each_assignment(fvars, m, row, 0, [&](const std::vector<Value>& r)
    {
      if (!out.diag.empty()) return;
      for (const Value& av : auniv)
      {
        m.set(task.quantified, av);
        if (!eval_bool(m, task.body, dp)) continue;
        out.models++;
        Model mx = m;
        Term proj;
        try
        {
          MbpTask t{{task.quantified}, task.body, task.index_domain};
          proj = combined_mbp(t, mx, dp, stats, cfg).result;
        }
        catch (const std::exception& e)
        {
          out.diag = std::string("projection failed: ") + e.what();
          return;
        }
        std::ostringstream os;
        for (size_t k = 0; k < fvars_list.size(); k++)
          os << " " << fvars_list[k]->name << "=" << show_value(r[k]);
        if (contains(proj, task.quantified))
        {
          out.diag = "variable survives at" + os.str();
          return;
        }
        if (!eval_bool(mx, proj, dp))
        {
          out.diag = "projection false in its own model at" + os.str() +
                     " a=" + show_value(av);
          return;
        }
        if (seen.insert(proj).second) out.projections.push_back(proj);
      }
    });
    if (!out.diag.empty()) return out;

    // coverage: the disjunction of projections is the existential closure
    Model m2;
    std::vector<Value> row2;
    detail::for_each_assignment(fvars, m2, row2, 0, [&](const std::vector<Value>& r)
    {
      if (!out.diag.empty()) return;
      bool lhs = false;
      for (const Value& av : auniv)
      {
        m2.set(task.quantified, av);
        if (eval_bool(m2, task.body, dp)) { lhs = true; break; }
      }
      bool rhs = false;
      for (Term p : out.projections)
        if (eval_bool(m2, p, dp)) { rhs = true; break; }
      bool bad = lhs && !rhs;  // a projected model is not covered
      if (!bad && rhs && !lhs)
      {
        // soundness is judged with the slack values available
        bad = true;
        for (const Value& av : auniv_ext)
        {
          m2.set(task.quantified, av);
          if (eval_bool(m2, task.body, dp)) { bad = false; break; }
        }
      }
      if (bad)
      {
        std::ostringstream os;
        os << "coverage mismatch (body " << (lhs ? "true" : "false") << ", projections "
           << (rhs ? "true" : "false") << ") at";
        for (size_t k = 0; k < fvars_list.size(); k++)
          os << " " << fvars_list[k]->name << "=" << show_value(r[k]);
        out.diag = os.str();
      }
    });
    return out;
  }

  // --- bounded reachability by explicit derivation-tree unrolling ---

  // Independent of the solver engine: a state is reachable at depth d if a
  // derivation tree of height at most d derives it. Transition clauses with
  // a second predicate occurrence branch the tree, so keep max_depth small
  // for those systems.
  struct BmcResult
  {
    bool reachable = false;
    int depth = -1;  // least depth with a counterexample
  };

  class BmcUnroller
  {
   public:
    explicit BmcUnroller(const ChcSystem& sys) : sys_(sys) {}

    TermVec tuple(const TermVec& proto)
    {
      TermVec out;
      for (Term v : proto) out.push_back(mk_var("bmc!" + std::to_string(ctr_++), v->sort));
      return out;
    }

    Term instance(Term f, const std::vector<std::pair<const TermVec*, const TermVec*>>& maps)
    {
      TermMap m;
      for (auto& [from, to] : maps)
        for (size_t k = 0; k < from->size(); k++) m[(*from)[k]] = (*to)[k];
      for (Term ax : sys_.aux_vars)
        m[ax] = mk_var("bmc!" + std::to_string(ctr_++), ax->sort);
      return replace(f, m);
    }

    // states derivable by a tree of height <= d, as a formula over xs
    Term reach(int d, const TermVec& xs)
    {
      Term base = instance(sys_.init, {{&sys_.state_vars, &xs}});
      if (d == 0) return base;
      Term below = reach(d - 1, xs);
      TermVec prev = tuple(sys_.state_vars);
      TermVec parts{reach(d - 1, prev)};
      std::vector<std::pair<const TermVec*, const TermVec*>> maps{
          {&sys_.state_vars, &prev}, {&sys_.post_vars, &xs}};
      TermVec call;
      if (sys_.has_call)
      {
        call = tuple(sys_.state_vars);
        parts.push_back(reach(d - 1, call));
        maps.push_back({&sys_.call_vars, &call});
      }
      parts.push_back(instance(sys_.tr, maps));
      return mk_or(below, mk_and(parts));
    }

   private:
    const ChcSystem& sys_;
    unsigned ctr_ = 0;
  };

  inline BmcResult bmc_reach(const ChcSystem& sys, Backend& be, int max_depth)
  {
    for (int d = 0; d <= max_depth; d++)
    {
      BmcUnroller u(sys);
      TermVec xs = u.tuple(sys.state_vars);
      Term phi = mk_and(u.reach(d, xs), u.instance(sys.bad, {{&sys.state_vars, &xs}}));
      SatResult r = be.check(phi);
      if (r.outcome == SatResult::Sat) return {true, d};
      if (r.outcome == SatResult::Unknown)
        throw OracleError("bounded reachability inconclusive: " + r.reason);
    }
    return {false, -1};
  }

  // --- seeded random QE tasks, sized for the brute-force oracle ---

  struct QeTaskGenOptions
  {
    Sort index_sort = int_sort();
    int max_writes = 3;
    int max_reads = 4;
    int max_peqs = 2;
    int atoms = 4;
  };

  class QeTaskGen
  {
   public:
    QeTaskGen(std::mt19937& rng, const FiniteDomainSpec& spec, QeTaskGenOptions opt = {})
        : rng_(rng), spec_(spec), opt_(opt)
    {
      Sort arr = array_sort(opt.index_sort, int_sort());
      a_ = mk_var("a", arr);
      b_ = mk_var("b", arr);
      if (opt.index_sort == int_sort())
        for (const char* n : {"i1", "i2", "i3"}) ivars_.push_back(mk_var(n, int_sort()));
      else
        pvar_ = mk_var("p1", bool_sort());
    }

    QeTask task()
    {
      writes_ = opt_.max_writes;
      reads_ = opt_.max_reads;
      peqs_ = opt_.max_peqs;
      QeTask t;
      t.quantified = a_;
      t.body = formula(opt_.atoms);
      return t;
    }

   private:
    int roll(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
    bool coin() { return roll(2) == 0; }

    Term index_term()
    {
      if (opt_.index_sort == bool_sort())
        return roll(3) == 0 ? pvar_ : mk_bool(coin());
      if (!ivars_.empty() && coin()) return ivars_[roll((int)ivars_.size())];
      return mk_int(spec_.index_dom[roll((int)spec_.index_dom.size())]);
    }

    Term value_term(int depth)
    {
      int c = roll(4);
      if (c == 0 && !ivars_.empty()) return ivars_[roll((int)ivars_.size())];
      if (c == 1 && reads_ > 0 && depth > 0)
      {
        reads_--;
        return mk_rd(array_term(depth - 1, true), index_term());
      }
      return mk_int(spec_.value_dom[roll((int)spec_.value_dom.size())]);
    }

    Term array_term(int depth, bool allow_a)
    {
      Term t = (allow_a && coin()) ? a_ : b_;
      while (depth > 0 && writes_ > 0 && roll(3) == 0)
      {
        writes_--;
        t = mk_wr(t, index_term(), value_term(depth - 1));
      }
      return t;
    }

    Term atom()
    {
      int c = roll(6);
      if (c <= 2)
      {
        Term x = value_term(2), y = value_term(2);
        switch (roll(3))
        {
          case 0: return mk_lt(x, y);
          case 1: return mk_le(x, y);
          default: return mk_eq(x, y);
        }
      }
      if (c <= 4 && peqs_ > 0)
      {
        peqs_--;
        TermVec excl;
        int n = roll(3);
        for (int k = 0; k < n; k++) excl.push_back(index_term());
        return mk_peq(array_term(1, true), array_term(1, false), excl);
      }
      return mk_eq(array_term(1, true), array_term(1, false));
    }

    Term formula(int n)
    {
      if (n <= 1)
      {
        Term t = atom();
        return roll(3) == 0 ? mk_not(t) : t;
      }
      int left = 1 + roll(n - 1);
      Term x = formula(left), y = formula(n - left);
      return coin() ? mk_and(x, y) : mk_or(x, y);
    }

    std::mt19937& rng_;
    FiniteDomainSpec spec_;
    QeTaskGenOptions opt_;
    Term a_, b_, pvar_ = nullptr;
    TermVec ivars_;
    int writes_ = 0, reads_ = 0, peqs_ = 0;
  };
}

#endif
