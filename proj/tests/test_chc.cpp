#include "hornarr/chc.hpp"
#include "hornarr/oracle.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>

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
}

TEST_CASE("a linear integer system normalizes onto canonical variables")
{
  ChcSystem sys = parse_chc(corpus_file("counter_safe.smt2"));
  CHECK(sys.pred == "inv");
  REQUIRE(sys.state_vars.size() == 1);
  CHECK(!sys.has_call);
  CHECK(sys.aux_vars.empty());
  Term x = sys.state_vars[0], xp = sys.post_vars[0];
  CHECK(sys.init == mk_eq(x, mk_int(0)));
  CHECK(sys.tr == mk_eq(xp, mk_add(x, mk_int(1))));
  CHECK(sys.bad == mk_lt(x, mk_int(0)));
}

TEST_CASE("second body occurrences map onto the call tuple")
{
  ChcSystem sys = parse_chc(corpus_file("chain_safe.smt2"));
  CHECK(sys.has_call);
  REQUIRE(sys.state_vars.size() == 2);
  // Inv(x y) /\ Inv(y z) -> Inv(x z): shared variables become equalities
  Term x = sys.state_vars[0], y = sys.state_vars[1];
  Term cx = sys.call_vars[0], cy = sys.call_vars[1];
  Term px = sys.post_vars[0], py = sys.post_vars[1];
  CHECK(contains(sys.tr, cx));
  CHECK(free_vars(sys.tr).size() == 6);
  Model m;
  m.set(x, Value::of_int(1));
  m.set(y, Value::of_int(2));
  m.set(cx, Value::of_int(2));
  m.set(cy, Value::of_int(5));
  m.set(px, Value::of_int(1));
  m.set(py, Value::of_int(5));
  CHECK(eval_bool(m, sys.tr, nullptr));
  m.set(cx, Value::of_int(3));  // call tuple must start where the first ends
  CHECK(!eval_bool(m, sys.tr, nullptr));
}

TEST_CASE("array systems keep reads and writes through normalization")
{
  ChcSystem sys = parse_chc(corpus_file("array_cell_safe.smt2"));
  REQUIRE(sys.state_vars.size() == 1);
  CHECK(sys.state_vars[0]->sort == array_sort(int_sort(), int_sort()));
  CHECK(sys.aux_vars.size() == 1);  // the write index
  bool has_store = false;
  for (Term t : subterms(sys.tr)) has_store = has_store || t->kind == Kind::Wr;
  CHECK(has_store);
}

TEST_CASE("nonconforming scripts are rejected with a diagnosis")
{
  auto bad = [](const std::string& s)
  {
    std::string msg;
    try
    {
      parse_chc(s);
    }
    catch (const ChcError& e)
    {
      msg = e.what();
    }
    return msg;
  };
  CHECK(bad("(assert true)") != "");
  CHECK(bad("(declare-fun p (Int) Bool)(declare-fun q (Int) Bool)") != "");
  CHECK(bad("(declare-fun p (Int) Bool)"
            "(assert (forall ((x Int)) (=> (or (p x) (< x 0)) (p x))))") != "");
  CHECK(bad("(declare-fun p (Int) Bool)"
            "(assert (forall ((x Int)) (=> (and (p x) (p (+ x 1)) (p (+ x 2))) false)))") !=
        "");
  CHECK(bad("(declare-fun p (Int) Bool)"
            "(assert (forall ((x Int) (y Bool)) (=> (p y) false)))") != "");
}

TEST_CASE("repeated and compound application arguments become equalities")
{
  ChcSystem sys = parse_chc(
      "(set-logic HORN)"
      "(declare-fun p (Int Int) Bool)"
      "(assert (forall ((x Int)) (=> (= x 0) (p x x))))"
      "(assert (forall ((x Int) (y Int)) (=> (p x y) (p y (+ x 1)))))"
      "(assert (forall ((x Int) (y Int)) (=> (and (p x y) (< y x)) false)))");
  Term s0 = sys.state_vars[0], s1 = sys.state_vars[1];
  // p x x: the second position is pinned to the first
  Model m;
  m.set(s0, Value::of_int(0));
  m.set(s1, Value::of_int(0));
  CHECK(eval_bool(m, sys.init, nullptr));
  m.set(s1, Value::of_int(1));
  CHECK(!eval_bool(m, sys.init, nullptr));
  // p y (+ x 1): compound argument as a post equality
  m.set(s0, Value::of_int(4));
  m.set(s1, Value::of_int(7));
  m.set(sys.post_vars[0], Value::of_int(7));
  m.set(sys.post_vars[1], Value::of_int(5));
  CHECK(eval_bool(m, sys.tr, nullptr));
}

TEST_CASE("bounded derivation trees witness reachability")
{
  SECTION("linear counterexample at its exact depth")
  {
    ChcSystem sys = parse_chc(corpus_file("counter_unsafe.smt2"));
    BmcResult r = bmc_reach(sys, backend(), 5);
    CHECK(r.reachable);
    CHECK(r.depth == 3);
  }
  SECTION("safe system has no bounded counterexample")
  {
    ChcSystem sys = parse_chc(corpus_file("counter_safe.smt2"));
    BmcResult r = bmc_reach(sys, backend(), 4);
    CHECK(!r.reachable);
  }
  SECTION("branching derivations through call clauses")
  {
    ChcSystem sys = parse_chc(corpus_file("chain_unsafe.smt2"));
    BmcResult r = bmc_reach(sys, backend(), 4);
    CHECK(r.reachable);
    CHECK(r.depth == 2);  // distance three needs one composition of two
  }
  SECTION("array counterexample")
  {
    ChcSystem sys = parse_chc(corpus_file("array_swap_unsafe.smt2"));
    BmcResult r = bmc_reach(sys, backend(), 3);
    CHECK(r.reachable);
    CHECK(r.depth == 1);
  }
}
