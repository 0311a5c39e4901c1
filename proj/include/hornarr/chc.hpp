#ifndef HORNARR_CHC_HPP
#define HORNARR_CHC_HPP

#include "smt2.hpp"
#include "term.hpp"

#include <optional>

namespace hornarr
{
  // Frontend for constrained Horn clauses over one unknown predicate, read
  // from an SMT-LIB2 script. Every clause is normalized onto one canonical
  // variable tuple per role:
  //   init:  Init(st)                          -> Inv(st)
  //   tr:    Inv(st) [/\ Inv(ca)] /\ Tr(...)   -> Inv(po)
  //   bad:   Inv(st) /\ Bad(st)                -> false
  // Clause-local variables that survive normalization are collected in
  // aux_vars and read existentially.

  struct ChcError : std::runtime_error
  {
    explicit ChcError(const std::string& m) : std::runtime_error(m) {}
  };

  struct ChcSystem
  {
    std::string pred;
    TermVec state_vars, post_vars, call_vars;
    Term init = mk_false();  // over state_vars (+aux)
    Term tr = mk_false();    // over state_vars, call_vars, post_vars (+aux)
    Term bad = mk_false();   // over state_vars (+aux)
    bool has_call = false;   // some transition clause uses a second occurrence
    TermVec aux_vars;
  };

  namespace chc_detail
  {
    inline bool is_pred_app(const SExpr& e, const std::string& pred)
    {
      return (e.is_atom() && e.atom == pred) ||
             (!e.is_atom() && e.size() >= 1 && e[0].is_atom() && e[0].atom == pred);
    }

    // conjunctive split of a clause body into predicate occurrences and
    // constraint parts; predicates anywhere else are a shape error
    inline void split_body(const SExpr& e, const std::string& pred,
                           std::vector<const SExpr*>& apps,
                           std::vector<const SExpr*>& constraint)
    {
      if (is_pred_app(e, pred))
      {
        apps.push_back(&e);
        return;
      }
      if (!e.is_atom() && e.size() >= 1 && e[0].is_atom() && e[0].atom == "and")
      {
        for (size_t k = 1; k < e.size(); k++) split_body(e[k], pred, apps, constraint);
        return;
      }
      std::string flat = e.str();
      if (flat.find("(" + pred + " ") != std::string::npos ||
          flat.find("(" + pred + ")") != std::string::npos)
        throw ChcError("predicate occurs under a non-conjunctive connective: " + flat);
      constraint.push_back(&e);
    }
  }

  inline ChcSystem parse_chc(const std::string& script)
  {
    ChcSystem sys;
    std::vector<Sort> sig;
    bool have_pred = false;
    struct Clause
    {
      TermVec binders;
      std::vector<TermVec> body_apps;
      std::optional<TermVec> head_app;
      Term constraint;
    };
    std::vector<Clause> clauses;

    for (const SExpr& cmd : read_sexprs(script))
    {
      if (cmd.is_atom() || cmd.size() == 0 || !cmd[0].is_atom())
        throw ChcError("unexpected toplevel form: " + cmd.str());
      const std::string& op = cmd[0].atom;
      if (op == "set-logic" || op == "set-option" || op == "set-info" || op == "check-sat" ||
          op == "get-model" || op == "exit")
        continue;
      if (op == "declare-fun")
      {
        if (cmd.size() != 4 || !cmd[1].is_atom())
          throw ChcError("malformed declare-fun: " + cmd.str());
        if (!cmd[3].is_atom() || cmd[3].atom != "Bool")
          throw ChcError("uninterpreted function is not a predicate: " + cmd.str());
        if (have_pred) throw ChcError("more than one unknown predicate");
        have_pred = true;
        sys.pred = cmd[1].atom;
        for (const SExpr& s : cmd[2].items) sig.push_back(parse_sort(s));
        continue;
      }
      if (op == "declare-const" || op == "declare-var")
        throw ChcError("free constants are not supported: " + cmd.str());
      if (op != "assert") throw ChcError("unsupported command: " + cmd.str());
      if (!have_pred) throw ChcError("clause before the predicate declaration");
      if (cmd.size() != 2) throw ChcError("malformed assert: " + cmd.str());

      const SExpr* e = &cmd[1];
      Clause cl;
      SymbolTable env;
      if (!e->is_atom() && e->size() == 3 && (*e)[0].is_atom() && (*e)[0].atom == "forall")
      {
        cl.binders = parse_binders((*e)[1], env);
        e = &(*e)[2];
      }
      const SExpr* body = nullptr;
      const SExpr* head = nullptr;
      if (!e->is_atom() && e->size() == 3 && (*e)[0].is_atom() && (*e)[0].atom == "=>")
      {
        body = &(*e)[1];
        head = &(*e)[2];
      }
      else if (!e->is_atom() && e->size() == 2 && (*e)[0].is_atom() && (*e)[0].atom == "not")
        body = &(*e)[1];  // (not B) is B => false
      else
        head = e;  // a fact

      std::vector<const SExpr*> apps, cparts;
      if (body) chc_detail::split_body(*body, sys.pred, apps, cparts);
      TermVec cterms;
      for (const SExpr* c : cparts) cterms.push_back(parse_term(*c, env));
      cl.constraint = mk_and(cterms);
      auto app_args = [&](const SExpr& app)
      {
        TermVec args;
        if (!app.is_atom())
          for (size_t k = 1; k < app.size(); k++) args.push_back(parse_term(app[k], env));
        if (args.size() != sig.size())
          throw ChcError("bad arity in application: " + app.str());
        for (size_t k = 0; k < args.size(); k++)
          if (args[k]->sort != sig[k]) throw ChcError("ill-sorted application: " + app.str());
        return args;
      };
      for (const SExpr* app : apps) cl.body_apps.push_back(app_args(*app));
      if (head)
      {
        if (head->is_atom() && head->atom == "false")
        {
        }
        else if (chc_detail::is_pred_app(*head, sys.pred))
          cl.head_app = app_args(*head);
        else
          throw ChcError("clause head is neither the predicate nor false: " + head->str());
      }
      if (cl.body_apps.size() > 2)
        throw ChcError("more than two predicate occurrences in one body");
      if (!cl.head_app && cl.body_apps.empty())
        throw ChcError("clause without any predicate occurrence");
      if (!cl.head_app && cl.body_apps.size() == 2)
        throw ChcError("query clause with two predicate occurrences");
      clauses.push_back(std::move(cl));
    }
    if (!have_pred) throw ChcError("no predicate declaration");

    for (size_t k = 0; k < sig.size(); k++)
    {
      sys.state_vars.push_back(mk_var("st!" + std::to_string(k), sig[k]));
      sys.post_vars.push_back(mk_var("po!" + std::to_string(k), sig[k]));
      sys.call_vars.push_back(mk_var("ca!" + std::to_string(k), sig[k]));
    }

    unsigned aux_ctr = 0;
    TermVec inits, trs, bads;
    for (const Clause& cl : clauses)
    {
      TermMap vmap;
      std::unordered_set<Term> binder_set(cl.binders.begin(), cl.binders.end());
      std::vector<std::pair<Term, Term>> eqs;
      auto bind = [&](const TermVec& canon, const TermVec& args)
      {
        for (size_t k = 0; k < canon.size(); k++)
        {
          Term u = args[k];
          if (u->kind == Kind::Var && binder_set.count(u) && !vmap.count(u))
            vmap[u] = canon[k];
          else
            eqs.push_back({canon[k], u});
        }
      };
      if (!cl.body_apps.empty()) bind(sys.state_vars, cl.body_apps[0]);
      if (cl.body_apps.size() == 2)
      {
        bind(sys.call_vars, cl.body_apps[1]);
        sys.has_call = true;
      }
      if (cl.head_app)
        bind(cl.body_apps.empty() ? sys.state_vars : sys.post_vars, *cl.head_app);
      for (Term v : cl.binders)
        if (!vmap.count(v))
        {
          Term ax = mk_var("ax!" + std::to_string(aux_ctr++), v->sort);
          vmap[v] = ax;
          sys.aux_vars.push_back(ax);
        }
      TermVec parts{replace(cl.constraint, vmap)};
      for (auto& [canon, u] : eqs) parts.push_back(mk_eq(canon, replace(u, vmap)));
      Term f = mk_and(parts);
      if (!cl.head_app) bads.push_back(f);
      else if (cl.body_apps.empty()) inits.push_back(f);
      else trs.push_back(f);
    }
    sys.init = mk_or(inits);
    sys.tr = mk_or(trs);
    sys.bad = mk_or(bads);
    return sys;
  }
}

#endif
