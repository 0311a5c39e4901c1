#ifndef HORNARR_SMT2_HPP
#define HORNARR_SMT2_HPP

#include "term.hpp"

#include <cctype>
#include <sstream>

namespace hornarr
{
  // --- printing ---

  // Internal syntax round-trips through parse_term; peq keeps its own head
  // symbol. Backend syntax is plain SMT-LIB2: peq is printed as its
  // write-chain expansion under an inner exists, divisibility as mod.
  enum class PrintMode { Internal, Backend };

  inline void print_term(std::ostream& os, Term t, PrintMode mode, unsigned& peq_ctr)
  {
    auto rec = [&](Term s) { print_term(os, s, mode, peq_ctr); };
    switch (t->kind)
    {
      case Kind::Var: os << t->name; return;
      case Kind::IntLit:
        if (t->num < 0) os << "(- " << -t->num << ")";
        else os << t->num;
        return;
      case Kind::BoolLit: os << (t->num ? "true" : "false"); return;
      case Kind::Add:
        os << "(+";
        for (Term a : t->args) { os << " "; rec(a); }
        os << ")";
        return;
      case Kind::Mul:
        os << "(* " << t->num << " ";
        rec(t->arg(0));
        os << ")";
        return;
      case Kind::Neg:
        os << "(- ";
        rec(t->arg(0));
        os << ")";
        return;
      case Kind::Divides:
        if (mode == PrintMode::Backend)
        {
          os << "(= (mod ";
          rec(t->arg(0));
          os << " " << t->num << ") 0)";
        }
        else
        {
          os << "((_ divisible " << t->num << ") ";
          rec(t->arg(0));
          os << ")";
        }
        return;
      case Kind::Lt:
      case Kind::Le:
      case Kind::Eq:
        os << "(" << (t->kind == Kind::Lt ? "<" : t->kind == Kind::Le ? "<=" : "=") << " ";
        rec(t->arg(0));
        os << " ";
        rec(t->arg(1));
        os << ")";
        return;
      case Kind::And:
      case Kind::Or:
        os << "(" << (t->kind == Kind::And ? "and" : "or");
        for (Term a : t->args) { os << " "; rec(a); }
        os << ")";
        return;
      case Kind::Not:
        // a negated partial equality has a purely existential reading --
        // the arrays differ at some index outside the exclusions -- which
        // avoids the quantifier alternation the store expansion would create
        if (mode == PrintMode::Backend && t->arg(0)->kind == Kind::Peq &&
            !peq_excl(t->arg(0)).empty())
        {
          Term p = t->arg(0);
          std::string j = "aj!" + std::to_string(peq_ctr++);
          os << "(exists ((" << j << " " << sort_name(p->arg(0)->sort->index) << ")) (and";
          for (Term i : peq_excl(p))
          {
            os << " (not (= " << j << " ";
            rec(i);
            os << "))";
          }
          os << " (not (= (select ";
          rec(p->arg(0));
          os << " " << j << ") (select ";
          rec(p->arg(1));
          os << " " << j << ")))))";
          return;
        }
        os << "(not ";
        rec(t->arg(0));
        os << ")";
        return;
      case Kind::Ite:
        os << "(ite ";
        rec(t->arg(0));
        os << " ";
        rec(t->arg(1));
        os << " ";
        rec(t->arg(2));
        os << ")";
        return;
      case Kind::Rd:
        os << "(select ";
        rec(t->arg(0));
        os << " ";
        rec(t->arg(1));
        os << ")";
        return;
      case Kind::Wr:
        os << "(store ";
        rec(t->arg(0));
        os << " ";
        rec(t->arg(1));
        os << " ";
        rec(t->arg(2));
        os << ")";
        return;
      case Kind::Peq:
      {
        TermVec is = peq_excl(t);
        if (mode == PrintMode::Internal)
        {
          os << "(peq ";
          rec(t->arg(0));
          os << " ";
          rec(t->arg(1));
          for (Term i : is) { os << " "; rec(i); }
          os << ")";
          return;
        }
        // a =_i b  <=>  exists vs . a = wr(b, is, vs)
        if (is.empty())
        {
          os << "(= ";
          rec(t->arg(0));
          os << " ";
          rec(t->arg(1));
          os << ")";
          return;
        }
        Sort vs = t->arg(0)->sort->value;
        std::vector<std::string> names;
        os << "(exists (";
        for (size_t k = 0; k < is.size(); k++)
        {
          names.push_back("av!" + std::to_string(peq_ctr++));
          os << (k ? " (" : "(") << names[k] << " " << sort_name(vs) << ")";
        }
        os << ") (= ";
        rec(t->arg(0));
        os << " ";
        Term w = t->arg(1);
        std::ostringstream chain;
        unsigned dummy = 0;
        print_term(chain, w, mode, dummy);
        std::string acc = chain.str();
        for (size_t k = 0; k < is.size(); k++)
        {
          std::ostringstream ix;
          print_term(ix, is[k], mode, dummy);
          acc = "(store " + acc + " " + ix.str() + " " + names[k] + ")";
        }
        os << acc << "))";
        return;
      }
    }
  }

  inline std::string to_smt2(Term t, PrintMode mode = PrintMode::Internal)
  {
    std::ostringstream os;
    unsigned ctr = 0;
    print_term(os, t, mode, ctr);
    return os.str();
  }

  // --- s-expressions ---

  struct SExpr
  {
    std::string atom;               // empty means list
    std::vector<SExpr> items;
    bool is_atom() const { return items.empty() && !atom.empty(); }
    const SExpr& operator[](size_t k) const { return items[k]; }
    size_t size() const { return items.size(); }
    std::string str() const
    {
      if (is_atom()) return atom;
      std::string s = "(";
      for (size_t k = 0; k < items.size(); k++)
        s += (k ? " " : "") + items[k].str();
      return s + ")";
    }
  };

  struct ParseError : std::runtime_error
  {
    explicit ParseError(const std::string& m) : std::runtime_error(m) {}
  };

  class SExprReader
  {
   public:
    explicit SExprReader(const std::string& text) : s_(text) {}

    bool at_end()
    {
      skip_ws();
      return pos_ >= s_.size();
    }

    SExpr next()
    {
      skip_ws();
      if (pos_ >= s_.size()) throw ParseError("unexpected end of input");
      if (s_[pos_] == '(')
      {
        pos_++;
        SExpr e;
        e.items.reserve(4);
        while (true)
        {
          skip_ws();
          if (pos_ >= s_.size()) throw ParseError("unbalanced parenthesis" + where());
          if (s_[pos_] == ')') { pos_++; break; }
          e.items.push_back(next());
        }
        if (e.items.empty()) e.atom.clear();
        return e;
      }
      if (s_[pos_] == ')') throw ParseError("stray ')'" + where());
      SExpr e;
      if (s_[pos_] == '"' || s_[pos_] == '|')
      {
        char q = s_[pos_];
        size_t start = pos_++;
        while (pos_ < s_.size() && s_[pos_] != q) pos_++;
        if (pos_ >= s_.size()) throw ParseError("unterminated quote" + where());
        pos_++;
        e.atom = s_.substr(start, pos_ - start);
        return e;
      }
      size_t start = pos_;
      while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) &&
             s_[pos_] != '(' && s_[pos_] != ')' && s_[pos_] != ';')
        pos_++;
      e.atom = s_.substr(start, pos_ - start);
      return e;
    }

   private:
    void skip_ws()
    {
      while (pos_ < s_.size())
      {
        char c = s_[pos_];
        if (c == ';')
        {
          while (pos_ < s_.size() && s_[pos_] != '\n') pos_++;
        }
        else if (std::isspace(static_cast<unsigned char>(c)))
          pos_++;
        else
          break;
      }
    }

    std::string where() const
    {
      size_t line = 1, col = 1;
      for (size_t k = 0; k < pos_ && k < s_.size(); k++)
      {
        if (s_[k] == '\n') { line++; col = 1; }
        else col++;
      }
      return " at line " + std::to_string(line) + ", column " + std::to_string(col);
    }

    const std::string& s_;
    size_t pos_ = 0;
  };

  inline std::vector<SExpr> read_sexprs(const std::string& text)
  {
    SExprReader r(text);
    std::vector<SExpr> out;
    while (!r.at_end()) out.push_back(r.next());
    return out;
  }

  inline Sort parse_sort(const SExpr& e)
  {
    if (e.is_atom())
    {
      if (e.atom == "Bool") return bool_sort();
      if (e.atom == "Int") return int_sort();
      throw ParseError("unsupported sort " + e.atom);
    }
    if (e.size() == 3 && e[0].is_atom() && e[0].atom == "Array")
      return array_sort(parse_sort(e[1]), parse_sort(e[2]));
    throw ParseError("unsupported sort " + e.str());
  }

  using SymbolTable = std::map<std::string, Term>;

  inline bool is_integer_atom(const std::string& a)
  {
    if (a.empty()) return false;
    size_t k = (a[0] == '-') ? 1 : 0;
    if (k >= a.size()) return false;
    for (; k < a.size(); k++)
      if (!std::isdigit(static_cast<unsigned char>(a[k]))) return false;
    return true;
  }

  inline Term parse_term(const SExpr& e, const SymbolTable& env)
  {
    if (e.is_atom())
    {
      if (e.atom == "true") return mk_true();
      if (e.atom == "false") return mk_false();
      if (is_integer_atom(e.atom)) return mk_int(std::stoll(e.atom));
      auto it = env.find(e.atom);
      if (it == env.end()) throw ParseError("unknown symbol " + e.atom);
      return it->second;
    }
    if (e.size() == 0) throw ParseError("empty application");
    // ((_ divisible n) t)
    if (!e[0].is_atom())
    {
      const SExpr& h = e[0];
      if (h.size() == 3 && h[0].atom == "_" && h[1].atom == "divisible")
        return mk_divides(std::stoll(h[2].atom), parse_term(e[1], env));
      throw ParseError("unsupported application " + e.str());
    }
    const std::string& op = e[0].atom;
    TermVec args;
    for (size_t k = 1; k < e.size(); k++) args.push_back(parse_term(e[k], env));
    if (op == "+") return mk_add(std::move(args));
    if (op == "-")
    {
      if (args.size() == 1) return mk_neg(args[0]);
      if (args.size() == 2) return mk_add(args[0], mk_neg(args[1]));
      throw ParseError("bad arity for -");
    }
    if (op == "*")
    {
      if (args.size() != 2) throw ParseError("bad arity for *");
      if (args[0]->kind == Kind::IntLit) return mk_mul(args[0]->num, args[1]);
      if (args[1]->kind == Kind::IntLit) return mk_mul(args[1]->num, args[0]);
      throw ParseError("non-linear product: " + e.str());
    }
    if (op == "<") return mk_lt(args[0], args[1]);
    if (op == "<=") return mk_le(args[0], args[1]);
    if (op == ">") return mk_gt(args[0], args[1]);
    if (op == ">=") return mk_ge(args[0], args[1]);
    if (op == "=")
    {
      if (args.size() < 2) throw ParseError("bad arity for =");
      TermVec eqs;
      for (size_t k = 0; k + 1 < args.size(); k++)
        eqs.push_back(mk_eq(args[k], args[k + 1]));
      return mk_and(std::move(eqs));
    }
    if (op == "distinct")
    {
      if (args.size() != 2) throw ParseError("distinct supported for 2 arguments");
      return mk_neq(args[0], args[1]);
    }
    if (op == "and") return mk_and(std::move(args));
    if (op == "or") return mk_or(std::move(args));
    if (op == "not") return mk_not(args[0]);
    if (op == "=>")
    {
      Term r = args.back();
      for (size_t k = args.size() - 1; k-- > 0;) r = mk_impl(args[k], r);
      return r;
    }
    if (op == "ite") return mk_ite(args[0], args[1], args[2]);
    if (op == "select") return mk_rd(args[0], args[1]);
    if (op == "store") return mk_wr(args[0], args[1], args[2]);
    if (op == "peq")
      return mk_peq(args[0], args[1], TermVec(args.begin() + 2, args.end()));
    throw ParseError("unsupported operator " + op);
  }

  inline Term parse_term(const std::string& text, const SymbolTable& env)
  {
    auto es = read_sexprs(text);
    if (es.size() != 1) throw ParseError("expected one term");
    return parse_term(es[0], env);
  }

  // Binder list of an exists/forall: ((x S) (y S) ...). Extends env.
  inline TermVec parse_binders(const SExpr& e, SymbolTable& env)
  {
    TermVec vars;
    for (const auto& b : e.items)
    {
      if (b.size() != 2 || !b[0].is_atom()) throw ParseError("bad binder " + b.str());
      Term v = mk_var(b[0].atom, parse_sort(b[1]));
      env[b[0].atom] = v;
      vars.push_back(v);
    }
    return vars;
  }
}

#endif
