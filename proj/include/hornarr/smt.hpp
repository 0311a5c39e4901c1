#ifndef HORNARR_SMT_HPP
#define HORNARR_SMT_HPP

#include "model.hpp"
#include "smt2.hpp"
#include "term.hpp"

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace hornarr
{
  struct BackendError : std::runtime_error
  {
    enum What { Death, Timeout, Protocol };
    What what_kind;
    BackendError(What w, const std::string& m) : std::runtime_error(m), what_kind(w) {}
  };

  struct SolverConfig
  {
    std::string cmd;
    int timeout_ms = 120000;

    static SolverConfig from_env()
    {
      SolverConfig c;
      const char* e = std::getenv("HORNARR_SOLVER");
      c.cmd = e ? e : "z3 -in";
      if (const char* t = std::getenv("HORNARR_SOLVER_TIMEOUT_MS")) c.timeout_ms = std::atoi(t);
      return c;
    }
  };

  struct SatResult
  {
    enum Outcome { Sat, Unsat, Unknown };
    Outcome outcome;
    Model model;                     // Sat
    std::vector<std::string> core;   // Unsat: names of a genuine unsat core
    std::string reason;              // Unknown
  };

  struct Countermodel
  {
    bool valid;
    Model model;  // meaningful when !valid
  };

  // One external SMT-LIB2 solver process over stdin/stdout. Every query runs
  // inside its own push/pop scope, so the session is stateless between calls.
  class Backend
  {
   public:
    explicit Backend(SolverConfig cfg = SolverConfig::from_env()) : cfg_(std::move(cfg))
    {
      start();
    }

    ~Backend() { stop(); }

    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    SatResult check(const std::vector<std::pair<std::string, Term>>& assertions)
    {
      TermVec terms;
      for (auto& [_, t] : assertions) terms.push_back(t);
      TermVec vars = free_vars(terms);
      std::ostringstream q;
      q << "(push 1)\n";
      declare(q, vars);
      for (auto& [name, t] : assertions)
        q << "(assert (! " << to_smt2(t, PrintMode::Backend) << " :named " << name << "))\n";
      q << "(check-sat)\n";
      std::string verdict;
      try
      {
        verdict = request_checked(q.str());
      }
      catch (const BackendError& e)
      {
        return unknown(e.what());
      }
      SatResult r;
      if (verdict == "sat")
      {
        r.outcome = SatResult::Sat;
        std::string resp;
        try
        {
          resp = request("(get-model)\n");
          r.model = parse_model(resp, vars);
        }
        catch (const BackendError& e)
        {
          return unknown(e.what());
        }
        catch (const ProtocolError& e)
        {
          request_quiet("(pop 1)\n");
          throw;
        }
      }
      else if (verdict == "unsat")
      {
        r.outcome = SatResult::Unsat;
        std::string resp;
        try
        {
          resp = request("(get-unsat-core)\n");
        }
        catch (const BackendError& e)
        {
          return unknown(e.what());
        }
        auto es = read_sexprs(resp);
        if (es.size() != 1) throw ProtocolError("bad unsat core response: " + resp);
        for (const auto& n : es[0].items) r.core.push_back(n.atom);
        if (es[0].is_atom()) r.core.push_back(es[0].atom);
      }
      else
      {
        return unknown("solver answered: " + verdict);
      }
      request_quiet("(pop 1)\n");
      return r;
    }

    SatResult check(Term t)
    {
      return check({{fresh_name(), t}});
    }

    // Validity of phi => psi; on failure the countermodel satisfies
    // phi /\ not psi (completed over the free variables of both).
    Countermodel entails(Term phi, Term psi)
    {
      SatResult r = check(mk_and(phi, mk_not(psi)));
      if (r.outcome == SatResult::Unsat) return {true, {}};
      if (r.outcome == SatResult::Sat) return {false, std::move(r.model)};
      throw BackendError(BackendError::Timeout, "entailment inconclusive: " + r.reason);
    }

    bool is_equivalent(Term phi, Term psi)
    {
      return entails(phi, psi).valid && entails(psi, phi).valid;
    }

    // Equivalence of two existentially closed formulas. The quantifier
    // prefixes are handed to the backend as-is.
    bool is_equivalent_closed(const TermVec& xs, Term phi, const TermVec& ys, Term psi)
    {
      return !closed_nonequiv_sat(xs, phi, ys, psi) && !closed_nonequiv_sat(ys, psi, xs, phi);
    }

    // satisfiability of (exists xs . phi) /\ not (exists ys . psi)
    bool closed_nonequiv_sat(const TermVec& xs, Term phi, const TermVec& ys, Term psi)
    {
      TermVec fv;
      {
        std::unordered_set<Term> bound(xs.begin(), xs.end());
        bound.insert(ys.begin(), ys.end());
        for (Term v : free_vars(TermVec{phi, psi}))
          if (!bound.count(v)) fv.push_back(v);
      }
      std::ostringstream q;
      q << "(push 1)\n";
      declare(q, fv);
      q << "(assert " << exists_smt2(xs, phi) << ")\n";
      q << "(assert (not " << exists_smt2(ys, psi) << "))\n";
      // plain search gives up on (or never returns from) nested array
      // quantifiers; quantifier-elimination preprocessing settles them
      q << "(check-sat-using (try-for (then qe smt) 30000))\n";
      std::string verdict = request_checked(q.str());
      if (verdict == "unknown") verdict = request("(check-sat-using (try-for smt 30000))\n");
      request_quiet("(pop 1)\n");
      if (verdict == "sat") return true;
      if (verdict == "unsat") return false;
      throw BackendError(BackendError::Timeout, "quantified check inconclusive: " + verdict);
    }

    static std::string exists_smt2(const TermVec& vars, Term body)
    {
      std::string b = to_smt2(body, PrintMode::Backend);
      if (vars.empty()) return b;
      std::string s = "(exists (";
      for (size_t k = 0; k < vars.size(); k++)
        s += (k ? " (" : "(") + vars[k]->name + " " + sort_name(vars[k]->sort) + ")";
      return s + ") " + b + ")";
    }

    std::string fresh_name() { return "k!" + std::to_string(name_ctr_++); }

    bool alive() const { return alive_; }

    // A raw command/response round trip, for tests.
    std::string raw(const std::string& cmd) { return request(cmd + "\n"); }

   private:
    SatResult unknown(const std::string& why)
    {
      SatResult r;
      r.outcome = SatResult::Unknown;
      r.reason = why;
      if (alive_) request_quiet("(pop 1)\n");
      return r;
    }

    static void declare(std::ostream& os, const TermVec& vars)
    {
      for (Term v : vars)
        os << "(declare-const " << v->name << " " << sort_name(v->sort) << ")\n";
    }

    void start()
    {
      int to_child[2], from_child[2];
      if (pipe(to_child) != 0 || pipe(from_child) != 0)
        throw BackendError(BackendError::Death, "pipe failed");
      pid_ = fork();
      if (pid_ < 0) throw BackendError(BackendError::Death, "fork failed");
      if (pid_ == 0)
      {
        dup2(to_child[0], 0);
        dup2(from_child[1], 1);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", cfg_.cmd.c_str(), (char*)nullptr);
        _exit(127);
      }
      close(to_child[0]);
      close(from_child[1]);
      in_ = to_child[1];
      out_ = from_child[0];
      buf_.clear();
      alive_ = true;
      request_quiet(
          "(set-option :produce-models true)\n"
          "(set-option :produce-unsat-cores true)\n"
          "(set-logic ALL)\n");
    }

    void stop()
    {
      if (!alive_) return;
      write_all("(exit)\n");
      close(in_);
      close(out_);
      int status;
      for (int k = 0; k < 50; k++)
      {
        if (waitpid(pid_, &status, WNOHANG) == pid_) { alive_ = false; return; }
        usleep(10000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
      alive_ = false;
    }

    void kill_now(const std::string& why)
    {
      if (alive_)
      {
        kill(pid_, SIGKILL);
        int status;
        waitpid(pid_, &status, 0);
        close(in_);
        close(out_);
        alive_ = false;
      }
      throw BackendError(BackendError::Timeout, why);
    }

    static int64_t now_ms()
    {
      return std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::steady_clock::now().time_since_epoch())
          .count();
    }

    void write_all(const std::string& s)
    {
      size_t off = 0;
      while (off < s.size())
      {
        ssize_t n = ::write(in_, s.data() + off, s.size() - off);
        if (n <= 0)
        {
          alive_ = false;
          throw BackendError(BackendError::Death, "solver process is gone");
        }
        off += static_cast<size_t>(n);
      }
    }

    // Sends the commands followed by an echo marker and collects everything
    // up to the marker line. The wall-clock budget covers the whole exchange.
    // The solver occasionally garbles a command (truncated parse, dropped
    // declaration) and then answers on the wrong assertion set. Queries are
    // self-contained push/pop scopes, so on any error output we restart the
    // process and replay the whole query.
    std::string request_checked(const std::string& cmds)
    {
      for (int attempt = 0;; attempt++)
      {
        std::string r = request(cmds);
        if (r.find("error") == std::string::npos && r.find("unsupported") == std::string::npos)
          return r;
        if (attempt >= 2) throw ProtocolError("solver error persists: " + r);
        restart();
      }
    }

    void restart()
    {
      if (alive_)
      {
        kill(pid_, SIGKILL);
        int status;
        waitpid(pid_, &status, 0);
        close(in_);
        close(out_);
        alive_ = false;
      }
      start();
    }

    std::string request(const std::string& cmds)
    {
      if (!alive_) start();
      std::string marker = "sync!" + std::to_string(sync_ctr_++);
      write_all(cmds + "(echo \"" + marker + "\")\n");
      std::string acc;
      int64_t deadline = now_ms() + cfg_.timeout_ms;
      while (true)
      {
        size_t nl;
        while ((nl = buf_.find('\n')) != std::string::npos)
        {
          std::string line = buf_.substr(0, nl);
          buf_.erase(0, nl + 1);
          if (line == marker || line == "\"" + marker + "\"")
          {
            while (!acc.empty() && (acc.back() == '\n' || acc.back() == ' ')) acc.pop_back();
            return acc;
          }
          acc += line + "\n";
        }
        int64_t left = deadline - now_ms();
        if (left <= 0) kill_now("solver call exceeded " + std::to_string(cfg_.timeout_ms) + " ms");
        struct pollfd pfd{out_, POLLIN, 0};
        int pr = poll(&pfd, 1, static_cast<int>(left));
        if (pr <= 0)
          kill_now("solver call exceeded " + std::to_string(cfg_.timeout_ms) + " ms");
        char chunk[65536];
        ssize_t n = ::read(out_, chunk, sizeof chunk);
        if (n <= 0)
        {
          alive_ = false;
          throw BackendError(BackendError::Death, "solver process closed its output");
        }
        buf_.append(chunk, static_cast<size_t>(n));
      }
    }

    void request_quiet(const std::string& cmds)
    {
      std::string r = request(cmds);
      if (!r.empty() && r.find("error") != std::string::npos)
        throw ProtocolError("solver error: " + r);
    }

    SolverConfig cfg_;
    pid_t pid_ = -1;
    int in_ = -1, out_ = -1;
    bool alive_ = false;
    std::string buf_;
    unsigned name_ctr_ = 0, sync_ctr_ = 0;
  };
}

#endif
