#pragma once

// The reward expression language: candidate reward functions are written in
// it, parsed, checked against an environment's variable catalog, compiled to
// a small stack program and evaluated once per simulation step.
//
//   program  := (let_stmt NEWLINE)* expr
//   let_stmt := "let" IDENT "=" expr
//   expr     := term (("+"|"-") term)*
//   term     := factor (("*"|"/") factor)*
//   factor   := "-" factor | NUMBER | IDENT | call | "(" expr ")"
//   call     := FUNC "(" args ")"   FUNC in {exp,abs,sqrt,min,max,tanh,clamp,if}
//   cond     := expr ("<"|"<="|">"|">="|"==") expr   (first argument of if only)

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "v2r/error.hpp"

namespace v2r::dsl {

/// The grammar above as plain text, embedded verbatim into prompts.
std::string_view grammar_text() noexcept;

struct SourcePos {
    std::size_t offset = 0;
    std::size_t line = 1;
    std::size_t column = 1;
};

std::string to_string(const SourcePos& pos);

class DslError : public Error {
public:
    DslError(ErrorCode code, SourcePos pos, const std::string& message)
        : Error(code, message), pos_(pos) {}

    [[nodiscard]] const SourcePos& position() const noexcept { return pos_; }

private:
    SourcePos pos_;
};

enum class ExprKind : std::uint8_t { Number, Variable, Negate, Binary, Compare, Call };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div };
enum class CompareOp : std::uint8_t { Lt, Le, Gt, Ge, Eq };
enum class Func : std::uint8_t { Exp, Abs, Sqrt, Min, Max, Tanh, Clamp, If };

std::string_view to_string(BinaryOp op) noexcept;
std::string_view to_string(CompareOp op) noexcept;
std::string_view to_string(Func f) noexcept;
std::size_t arity(Func f) noexcept;

struct Expr {
    ExprKind kind = ExprKind::Number;
    double number = 0.0;
    std::string name;  // variable name
    BinaryOp binary_op = BinaryOp::Add;
    CompareOp compare_op = CompareOp::Lt;
    Func func = Func::Exp;
    std::vector<Expr> args;  // operands / call arguments
    SourcePos pos;

    static Expr literal(double v, SourcePos pos = {});
    static Expr variable(std::string name, SourcePos pos = {});
    static Expr negate(Expr operand, SourcePos pos = {});
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs, SourcePos pos = {});
    static Expr compare(CompareOp op, Expr lhs, Expr rhs, SourcePos pos = {});
    static Expr call(Func f, std::vector<Expr> args, SourcePos pos = {});
};

/// Equality ignoring source positions.
bool structurally_equal(const Expr& a, const Expr& b);

struct Binding {
    std::string name;
    Expr value;
    SourcePos pos;
};

struct ParsedProgram {
    std::string source;
    std::vector<Binding> bindings;
    Expr body;
};

bool structurally_equal(const ParsedProgram& a, const ParsedProgram& b);

/// Throws DslError with code Lexical, Syntax or Arity.
ParsedProgram parse(std::string_view source);

/// Canonical, fully parenthesized form; reparses to a structurally equal tree.
std::string pretty_print(const Expr& expr);
std::string pretty_print(const ParsedProgram& program);

/// A checked, compiled reward program. Immutable and safe to evaluate from
/// many threads at once.
class RewardProgram {
public:
    [[nodiscard]] const std::string& source() const noexcept { return parsed_.source; }
    [[nodiscard]] const ParsedProgram& parsed() const noexcept { return parsed_; }
    [[nodiscard]] const std::vector<Binding>& bindings() const noexcept { return parsed_.bindings; }
    [[nodiscard]] const Expr& body() const noexcept { return parsed_.body; }
    /// Environment variables the program reads.
    [[nodiscard]] const std::set<std::string>& referenced_vars() const noexcept { return referenced_; }
    /// The variable catalog the program was checked against; `evaluate`
    /// expects state values in this order.
    [[nodiscard]] const std::vector<std::string>& variables() const noexcept { return variables_; }
    [[nodiscard]] std::size_t guarded_divisions() const noexcept { return guarded_divisions_; }

    /// Throws Error(GuardedDivision) when |denominator| < 1e-9 and
    /// Error(NonFinite) when any intermediate value is not finite.
    [[nodiscard]] double evaluate(std::span<const double> state) const;
    [[nodiscard]] double evaluate(const std::map<std::string, double>& state) const;

private:
    friend RewardProgram check(const ParsedProgram&, std::span<const std::string>);

    enum class Op : std::uint8_t {
        Const, Load, Store, Neg, Add, Sub, Mul, Div,
        Exp, Abs, Sqrt, Tanh, Min, Max, Clamp,
        JumpUnless,  // pops rhs, lhs; jumps to target when the comparison fails
        Jump,
    };
    struct Instr {
        Op op;
        CompareOp cmp = CompareOp::Lt;
        std::uint32_t index = 0;  // slot or jump target
        double value = 0.0;
    };

    void compile();
    void emit(const Expr& e, const std::map<std::string, std::uint32_t>& slots);

    ParsedProgram parsed_;
    std::vector<std::string> variables_;
    std::set<std::string> referenced_;
    std::size_t guarded_divisions_ = 0;
    std::vector<Instr> code_;
    std::size_t slot_count_ = 0;
    std::size_t max_stack_ = 0;
};

inline constexpr double kDivisionGuard = 1e-9;

/// Resolves every free variable against `variables` and earlier bindings.
/// Throws DslError with code UnknownVariable, DuplicateBinding or Shadowing.
RewardProgram check(const ParsedProgram& program, std::span<const std::string> variables);

/// parse + check.
RewardProgram compile_reward(std::string_view source, std::span<const std::string> variables);

}  // namespace v2r::dsl
