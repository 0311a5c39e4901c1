#include "hornarr/engine.hpp"
#include "hornarr/oracle.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace hornarr;

namespace
{
  std::string corpus_file(const std::string& name)
  {
    const char* dir = std::getenv("HORNARR_CORPUS");
    REQUIRE(dir != nullptr);
    std::ifstream in(std::string(dir) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  Backend& backend()
  {
    static Backend s;
    return s;
  }

  EngineResult run(const std::string& name, EngineConfig cfg = {})
  {
    cfg.validate = true;  // every lemma, fact and verdict double-checked
    ChcSystem sys = parse_chc(corpus_file(name));
    return solve_chc(sys, backend(), cfg);
  }
}

TEST_CASE("a counter proves safe with a validated inductive invariant")
{
  EngineResult r = run("counter_safe.smt2");
  CHECK(r.verdict == Verdict::Safe);
  REQUIRE(r.invariant != nullptr);
  // the invariant separates the system from x < 0
  ChcSystem sys = parse_chc(corpus_file("counter_safe.smt2"));
  CHECK(backend().check(mk_and(r.invariant, sys.bad)).outcome == SatResult::Unsat);
}

TEST_CASE("counterexamples surface at the depth the bounded oracle reports")
{
  SECTION("three increments to the failing value")
  {
    EngineResult r = run("counter_unsafe.smt2");
    CHECK(r.verdict == Verdict::Unsafe);
    ChcSystem sys = parse_chc(corpus_file("counter_unsafe.smt2"));
    BmcResult b = bmc_reach(sys, backend(), r.depth);
    CHECK(b.reachable);
    CHECK(b.depth == r.depth);
  }
  SECTION("branching transition relation")
  {
    CHECK(run("branch_unsafe.smt2").verdict == Verdict::Unsafe);
  }
  SECTION("countdown through zero")
  {
    CHECK(run("countdown_unsafe.smt2").verdict == Verdict::Unsafe);
  }
}

TEST_CASE("safe integer systems reach a fixpoint")
{
  CHECK(run("two_counters_safe.smt2").verdict == Verdict::Safe);
  CHECK(run("branch_safe.smt2").verdict == Verdict::Safe);
  CHECK(run("skip_steps_safe.smt2").verdict == Verdict::Safe);
}

TEST_CASE("array manipulating systems solve in both directions")
{
  CHECK(run("array_cell_safe.smt2").verdict == Verdict::Safe);
  CHECK(run("array_track_safe.smt2").verdict == Verdict::Safe);
  CHECK(run("array_incr_unsafe.smt2").verdict == Verdict::Unsafe);
  CHECK(run("array_swap_unsafe.smt2").verdict == Verdict::Unsafe);
}

TEST_CASE("pointwise equal arrays need the equality strengthening")
{
  EngineConfig cfg;
  cfg.heuristic_array_eq = true;
  EngineResult r = run("mirror_writes_safe.smt2", cfg);
  CHECK(r.verdict == Verdict::Safe);
}

TEST_CASE("call clauses resolve through must summaries")
{
  EngineResult safe = run("chain_safe.smt2");
  CHECK(safe.verdict == Verdict::Safe);
  EngineResult unsafe = run("chain_unsafe.smt2");
  CHECK(unsafe.verdict == Verdict::Unsafe);
  CHECK(unsafe.rule_counts["DecideMust"] + unsafe.rule_counts["Successor"] > 0);
}

TEST_CASE("an exhausted bound reports unknown instead of guessing")
{
  EngineConfig cfg;
  cfg.max_depth = 1;
  EngineResult r = run("counter_unsafe.smt2", cfg);
  CHECK(r.verdict == Verdict::Unknown);
  CHECK(r.reason.find("bound") != std::string::npos);
}

TEST_CASE("the trace names the rules as they fire")
{
  std::ostringstream trace;
  EngineConfig cfg;
  cfg.trace = &trace;
  EngineResult r = run("counter_safe.smt2", cfg);
  CHECK(r.verdict == Verdict::Safe);
  CHECK(trace.str().find("Candidate") != std::string::npos);
  CHECK(trace.str().find("Conflict") != std::string::npos);
  CHECK(trace.str().find("Safe") != std::string::npos);
}

TEST_CASE("point successors solve what projected successors solve")
{
  EngineConfig cfg;
  cfg.successor_mbp = false;
  CHECK(run("counter_unsafe.smt2", cfg).verdict == Verdict::Unsafe);
  CHECK(run("counter_safe.smt2", cfg).verdict == Verdict::Safe);
}
