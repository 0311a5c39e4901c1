#include "hornarr/engine.hpp"
#include "hornarr/oracle.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace hornarr;

namespace
{
  std::string slurp(const std::string& path)
  {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  // declarations plus one asserted (exists (...) body); used by qe/mbp/oracle
  struct ExistsScript
  {
    TermVec bound;
    Term body = mk_true();
    TermVec declared;
  };

  ExistsScript parse_exists_script(const std::string& text)
  {
    ExistsScript s;
    SymbolTable env;
    TermVec asserted;
    for (const SExpr& cmd : read_sexprs(text))
    {
      if (cmd.is_atom() || cmd.size() == 0 || !cmd[0].is_atom())
        throw std::runtime_error("unexpected toplevel form: " + cmd.str());
      const std::string& op = cmd[0].atom;
      if (op == "set-logic" || op == "set-option" || op == "set-info" || op == "check-sat" ||
          op == "get-model" || op == "exit")
        continue;
      if (op == "declare-const" || op == "declare-fun")
      {
        size_t sort_at = op == "declare-const" ? 2 : 3;
        if (cmd.size() != sort_at + 1 || !cmd[1].is_atom() ||
            (op == "declare-fun" && cmd[2].size() != 0))
          throw std::runtime_error("only constants can be declared: " + cmd.str());
        Term v = mk_var(cmd[1].atom, parse_sort(cmd[sort_at]));
        env[cmd[1].atom] = v;
        s.declared.push_back(v);
        continue;
      }
      if (op != "assert" || cmd.size() != 2)
        throw std::runtime_error("unsupported command: " + cmd.str());
      const SExpr& e = cmd[1];
      if (!e.is_atom() && e.size() == 3 && e[0].is_atom() && e[0].atom == "exists")
      {
        if (!s.bound.empty()) throw std::runtime_error("more than one exists assertion");
        SymbolTable inner = env;
        s.bound = parse_binders(e[1], inner);
        asserted.push_back(parse_term(e[2], inner));
      }
      else
        asserted.push_back(parse_term(e, env));
    }
    s.body = mk_and(asserted);
    return s;
  }

  std::vector<int64_t> parse_domain(const std::string& csv)
  {
    std::vector<int64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoll(tok));
    if (out.empty()) throw std::runtime_error("empty domain");
    return out;
  }
}

int main(int argc, char** argv)
{
  CLI::App app{"compositional CHC safety solver for arrays and integers"};
  app.require_subcommand(1);

  std::string file, model_file;
  std::string solver_cmd;
  int timeout_ms = 0;
  int max_depth = 30;
  bool validate = false, trace = false, finite_index = false;
  bool heuristic_array_eq = false, heuristic_eq_res = true, successor_mbp = true;
  unsigned seed = 1;
  std::string index_dom = "0,1,2", value_dom = "0,1,2";

  auto add_common = [&](CLI::App* c)
  {
    c->add_option("file", file, "input SMT-LIB2 script")->required();
    c->add_option("--solver-cmd", solver_cmd, "external solver command");
    c->add_option("--timeout-ms", timeout_ms, "per-query solver timeout");
    c->add_flag("--validate", validate, "double-check results through the backend");
    c->add_flag("--trace", trace, "print rule applications to stderr");
  };

  CLI::App* solve = app.add_subcommand("solve", "decide safety of a CHC system");
  add_common(solve);
  solve->add_option("--max-depth", max_depth, "bound on the unfolding level");
  solve->add_flag("--heuristic-array-eq", heuristic_array_eq,
                  "strengthen obligations with array (dis)equalities");
  solve->add_flag("!--no-heuristic-eq-res", heuristic_eq_res,
                  "disable the equality resolution prepass");
  solve->add_flag("!--no-successor-mbp", successor_mbp,
                  "use model point values instead of projected successors");

  CLI::App* qe = app.add_subcommand("qe", "eliminate an array quantifier");
  add_common(qe);
  qe->add_flag("--finite-index", finite_index, "finite index sort semantics");

  CLI::App* mbp = app.add_subcommand("mbp", "project bound variables under a model");
  add_common(mbp);
  mbp->add_option("--model", model_file, "model response file")->required();
  mbp->add_flag("--finite-index", finite_index, "finite index sort semantics");
  mbp->add_option("--index-dom", index_dom, "finite index domain (csv)");
  mbp->add_option("--value-dom", value_dom, "finite value domain (csv)");
  mbp->add_flag("!--no-heuristic-eq-res", heuristic_eq_res,
                "disable the equality resolution prepass");

  CLI::App* oracle = app.add_subcommand("oracle", "independent ground-truth checks");
  std::string mode;
  oracle->add_option("mode", mode, "bmc | brute | enum")->required();
  add_common(oracle);
  oracle->add_option("--max-depth", max_depth, "unrolling bound for bmc");
  oracle->add_option("--index-dom", index_dom, "finite index domain (csv)");
  oracle->add_option("--value-dom", value_dom, "finite value domain (csv)");
  oracle->add_option("--seed", seed, "generator seed (reserved)");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    app.exit(e);
    return 2;
  }

  try
  {
    SolverConfig scfg = SolverConfig::from_env();
    if (!solver_cmd.empty()) scfg.cmd = solver_cmd;
    if (timeout_ms > 0) scfg.timeout_ms = timeout_ms;

    if (solve->parsed())
    {
      ChcSystem sys = parse_chc(slurp(file));
      Backend be(scfg);
      EngineConfig cfg;
      cfg.max_depth = max_depth;
      cfg.validate = validate;
      cfg.heuristic_array_eq = heuristic_array_eq;
      cfg.heuristic_eq_res = heuristic_eq_res;
      cfg.successor_mbp = successor_mbp;
      if (trace) cfg.trace = &std::cerr;
      EngineResult r = solve_chc(sys, be, cfg);
      if (r.verdict == Verdict::Safe)
      {
        std::cout << "sat\n(define-fun " << sys.pred << " (";
        for (size_t k = 0; k < sys.state_vars.size(); k++)
          std::cout << (k ? " (" : "(") << sys.state_vars[k]->name << " "
                    << sort_name(sys.state_vars[k]->sort) << ")";
        std::cout << ") Bool " << to_smt2(r.invariant) << ")\n";
        return 0;
      }
      if (r.verdict == Verdict::Unsafe)
      {
        if (validate)
        {
          BmcResult b = bmc_reach(sys, be, r.depth);
          if (!b.reachable) throw std::runtime_error("bounded oracle disagrees with unsafe");
        }
        std::cout << "unsat\n";
        std::cerr << "counterexample depth " << r.depth << "\n";
        return 0;
      }
      std::cout << "unknown\n";
      std::cerr << r.reason << "\n";
      return 1;
    }

    if (qe->parsed())
    {
      ExistsScript s = parse_exists_script(slurp(file));
      Term phi = s.body;
      TermVec fresh;
      for (Term v : s.bound)
      {
        if (v->sort->kind != SortNode::Array)
          throw std::runtime_error("qe eliminates array variables only");
        QeTask t{v, phi, finite_index ? IndexMode::Finite : IndexMode::Infinite};
        QeResult r = array_qe(t);
        phi = r.matrix;
        fresh.insert(fresh.end(), r.fresh_value_vars.begin(), r.fresh_value_vars.end());
        fresh.insert(fresh.end(), r.fresh_index_vars.begin(), r.fresh_index_vars.end());
      }
      if (validate)
      {
        Backend be(scfg);
        if (!be.is_equivalent_closed(s.bound, s.body, fresh, phi))
          throw std::runtime_error("elimination result is not equivalent");
      }
      std::cout << Backend::exists_smt2(fresh, phi) << "\n";
      return 0;
    }

    if (mbp->parsed())
    {
      ExistsScript s = parse_exists_script(slurp(file));
      TermVec all = s.declared;
      all.insert(all.end(), s.bound.begin(), s.bound.end());
      Model m = parse_model(slurp(model_file), all);
      m = complete(std::move(m), all);
      IndexDomain dom;
      for (int64_t i : parse_domain(index_dom)) dom.ints.push_back(i);
      const IndexDomain* dp = finite_index ? &dom : nullptr;
      if (!eval_bool(m, s.body, dp)) throw std::runtime_error("model does not satisfy the body");
      MbpTask t{s.bound, s.body, finite_index ? IndexMode::Finite : IndexMode::Infinite};
      MbpConfig cfg;
      cfg.eq_res = heuristic_eq_res;
      MbpOutcome out = combined_mbp(t, m, dp, nullptr, cfg);
      if (validate)
      {
        Backend be(scfg);
        if (be.closed_nonequiv_sat({}, out.result, s.bound, s.body))
          throw std::runtime_error("projection does not imply the closure");
      }
      std::cout << to_smt2(out.result) << "\n";
      std::cout << "; used_substitution " << (out.used_substitution ? "true" : "false") << "\n";
      return 0;
    }

    // oracle
    if (mode == "bmc")
    {
      ChcSystem sys = parse_chc(slurp(file));
      Backend be(scfg);
      BmcResult r = bmc_reach(sys, be, max_depth);
      if (r.reachable)
        std::cout << "reachable depth=" << r.depth << "\n";
      else
        std::cout << "unreachable max-depth=" << max_depth << "\n";
      return 0;
    }
    if (mode == "brute" || mode == "enum")
    {
      ExistsScript s = parse_exists_script(slurp(file));
      if (s.bound.size() != 1) throw std::runtime_error("oracle needs one bound variable");
      FiniteDomainSpec spec{parse_domain(index_dom), parse_domain(value_dom)};
      QeTask t{s.bound[0], s.body, IndexMode::Finite};
      if (mode == "brute")
      {
        TruthTable tbl = brute_qe(t, spec);
        for (Term v : tbl.vars) std::cout << v->name << " ";
        std::cout << "| exists\n";
        for (auto& [vals, truth] : tbl.rows)
        {
          for (const Value& v : vals) std::cout << show_value(v) << " ";
          std::cout << "| " << (truth ? "true" : "false") << "\n";
        }
        return 0;
      }
      MbpEnumeration e = mbp_enumerate(t, spec);
      for (Term p : e.projections) std::cout << to_smt2(p) << "\n";
      std::cout << "; models " << e.models << "\n";
      if (!e.diag.empty())
      {
        std::cerr << e.diag << "\n";
        return 1;
      }
      return 0;
    }
    throw std::runtime_error("unknown oracle mode: " + mode);
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
