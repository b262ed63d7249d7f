#include <algorithm>
#include <array>
#include <cmath>

#include "v2r/reward_dsl.hpp"

namespace v2r::dsl {

namespace {

void resolve(const Expr& e, const std::set<std::string>& schema, const std::set<std::string>& bound,
             std::set<std::string>& referenced, std::size_t& divisions) {
    if (e.kind == ExprKind::Variable) {
        if (schema.count(e.name) != 0) {
            referenced.insert(e.name);
        } else if (bound.count(e.name) == 0) {
            throw DslError(ErrorCode::UnknownVariable, e.pos,
                           "unknown variable '" + e.name + "' at " + to_string(e.pos));
        }
    }
    if (e.kind == ExprKind::Binary && e.binary_op == BinaryOp::Div) ++divisions;
    for (const auto& arg : e.args) resolve(arg, schema, bound, referenced, divisions);
}

[[noreturn]] void non_finite(const char* what) {
    throw Error(ErrorCode::NonFinite, std::string("non-finite value produced by ") + what);
}

bool compare(CompareOp op, double lhs, double rhs) {
    switch (op) {
        case CompareOp::Lt: return lhs < rhs;
        case CompareOp::Le: return lhs <= rhs;
        case CompareOp::Gt: return lhs > rhs;
        case CompareOp::Ge: return lhs >= rhs;
        case CompareOp::Eq: return lhs == rhs;
    }
    return false;
}

}  // namespace

RewardProgram check(const ParsedProgram& program, std::span<const std::string> variables) {
    const std::set<std::string> schema(variables.begin(), variables.end());
    std::set<std::string> bound;

    RewardProgram out;
    out.parsed_ = program;
    out.variables_.assign(variables.begin(), variables.end());

    for (const auto& b : program.bindings) {
        if (bound.count(b.name) != 0) {
            throw DslError(ErrorCode::DuplicateBinding, b.pos,
                           "duplicate binding '" + b.name + "' at " + to_string(b.pos));
        }
        if (schema.count(b.name) != 0) {
            throw DslError(ErrorCode::Shadowing, b.pos,
                           "binding '" + b.name + "' shadows an environment variable at " +
                               to_string(b.pos));
        }
        // Only earlier bindings are visible, so self and forward references fail here.
        resolve(b.value, schema, bound, out.referenced_, out.guarded_divisions_);
        bound.insert(b.name);
    }
    resolve(program.body, schema, bound, out.referenced_, out.guarded_divisions_);
    out.compile();
    return out;
}

RewardProgram compile_reward(std::string_view source, std::span<const std::string> variables) {
    return check(parse(source), variables);
}

void RewardProgram::compile() {
    std::map<std::string, std::uint32_t> slots;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        slots.emplace(variables_[i], static_cast<std::uint32_t>(i));
    }
    slot_count_ = variables_.size();
    code_.clear();
    for (const auto& b : parsed_.bindings) {
        emit(b.value, slots);
        const auto slot = static_cast<std::uint32_t>(slot_count_++);
        code_.push_back({Op::Store, CompareOp::Lt, slot, 0.0});
        slots[b.name] = slot;
    }
    emit(parsed_.body, slots);

    // Simulated stack depth over straight-line code; branches only shorten it.
    std::size_t depth = 0;
    max_stack_ = 0;
    for (const auto& in : code_) {
        switch (in.op) {
            case Op::Const:
            case Op::Load: ++depth; break;
            case Op::Store:
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div:
            case Op::Min:
            case Op::Max: --depth; break;
            case Op::Clamp:
            case Op::JumpUnless: depth -= 2; break;
            default: break;
        }
        max_stack_ = std::max(max_stack_, depth);
    }
    max_stack_ += 1;
}

void RewardProgram::emit(const Expr& e, const std::map<std::string, std::uint32_t>& slots) {
    switch (e.kind) {
        case ExprKind::Number:
            code_.push_back({Op::Const, CompareOp::Lt, 0, e.number});
            return;
        case ExprKind::Variable:
            code_.push_back({Op::Load, CompareOp::Lt, slots.at(e.name), 0.0});
            return;
        case ExprKind::Negate:
            emit(e.args[0], slots);
            code_.push_back({Op::Neg});
            return;
        case ExprKind::Binary: {
            emit(e.args[0], slots);
            emit(e.args[1], slots);
            static constexpr std::array<Op, 4> ops{Op::Add, Op::Sub, Op::Mul, Op::Div};
            code_.push_back({ops[static_cast<std::size_t>(e.binary_op)]});
            return;
        }
        case ExprKind::Compare:
            // Only reachable through `if`, which emits its own jump.
            emit(e.args[0], slots);
            emit(e.args[1], slots);
            return;
        case ExprKind::Call:
            break;
    }

    if (e.func == Func::If) {
        const auto& cond = e.args[0];
        emit(cond, slots);
        const std::size_t branch = code_.size();
        code_.push_back({Op::JumpUnless, cond.compare_op, 0, 0.0});
        emit(e.args[1], slots);
        const std::size_t skip = code_.size();
        code_.push_back({Op::Jump});
        code_[branch].index = static_cast<std::uint32_t>(code_.size());
        emit(e.args[2], slots);
        code_[skip].index = static_cast<std::uint32_t>(code_.size());
        return;
    }
    for (const auto& arg : e.args) emit(arg, slots);
    switch (e.func) {
        case Func::Exp: code_.push_back({Op::Exp}); break;
        case Func::Abs: code_.push_back({Op::Abs}); break;
        case Func::Sqrt: code_.push_back({Op::Sqrt}); break;
        case Func::Tanh: code_.push_back({Op::Tanh}); break;
        case Func::Min: code_.push_back({Op::Min}); break;
        case Func::Max: code_.push_back({Op::Max}); break;
        case Func::Clamp: code_.push_back({Op::Clamp}); break;
        case Func::If: break;
    }
}

double RewardProgram::evaluate(std::span<const double> state) const {
    if (state.size() != variables_.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "state has " + std::to_string(state.size()) + " values, program expects " +
                        std::to_string(variables_.size()));
    }
    constexpr std::size_t kInline = 128;
    std::array<double, kInline> inline_buf;
    std::vector<double> heap_buf;
    double* slots = inline_buf.data();
    if (slot_count_ + max_stack_ > kInline) {
        heap_buf.resize(slot_count_ + max_stack_);
        slots = heap_buf.data();
    }
    std::copy(state.begin(), state.end(), slots);
    double* stack = slots + slot_count_;
    std::size_t sp = 0;

    const std::size_t n = code_.size();
    for (std::size_t pc = 0; pc < n; ++pc) {
        const Instr& in = code_[pc];
        switch (in.op) {
            case Op::Const:
                stack[sp++] = in.value;
                break;
            case Op::Load: {
                const double v = slots[in.index];
                if (!std::isfinite(v)) non_finite("a state variable");
                stack[sp++] = v;
                break;
            }
            case Op::Store:
                slots[in.index] = stack[--sp];
                break;
            case Op::Neg:
                stack[sp - 1] = -stack[sp - 1];
                break;
            case Op::Add:
                --sp;
                stack[sp - 1] = stack[sp - 1] + stack[sp];
                if (!std::isfinite(stack[sp - 1])) non_finite("'+'");
                break;
            case Op::Sub:
                --sp;
                stack[sp - 1] = stack[sp - 1] - stack[sp];
                if (!std::isfinite(stack[sp - 1])) non_finite("'-'");
                break;
            case Op::Mul:
                --sp;
                stack[sp - 1] = stack[sp - 1] * stack[sp];
                if (!std::isfinite(stack[sp - 1])) non_finite("'*'");
                break;
            case Op::Div:
                --sp;
                if (std::fabs(stack[sp]) < kDivisionGuard) {
                    throw Error(ErrorCode::GuardedDivision, "division by a denominator below 1e-9");
                }
                stack[sp - 1] = stack[sp - 1] / stack[sp];
                if (!std::isfinite(stack[sp - 1])) non_finite("'/'");
                break;
            case Op::Exp:
                stack[sp - 1] = std::exp(stack[sp - 1]);
                if (!std::isfinite(stack[sp - 1])) non_finite("exp");
                break;
            case Op::Abs:
                stack[sp - 1] = std::fabs(stack[sp - 1]);
                break;
            case Op::Sqrt:
                stack[sp - 1] = std::sqrt(stack[sp - 1]);
                if (!std::isfinite(stack[sp - 1])) non_finite("sqrt");
                break;
            case Op::Tanh:
                stack[sp - 1] = std::tanh(stack[sp - 1]);
                break;
            case Op::Min:
                --sp;
                if (stack[sp] < stack[sp - 1]) stack[sp - 1] = stack[sp];
                break;
            case Op::Max:
                --sp;
                if (stack[sp] > stack[sp - 1]) stack[sp - 1] = stack[sp];
                break;
            case Op::Clamp: {
                sp -= 2;
                const double x = stack[sp - 1];
                const double lo = stack[sp];
                const double hi = stack[sp + 1];
                const double raised = lo > x ? lo : x;
                stack[sp - 1] = hi < raised ? hi : raised;
                break;
            }
            case Op::JumpUnless: {
                sp -= 2;
                if (!compare(in.cmp, stack[sp], stack[sp + 1])) pc = in.index - 1;
                break;
            }
            case Op::Jump:
                pc = in.index - 1;
                break;
        }
    }
    return stack[0];
}

double RewardProgram::evaluate(const std::map<std::string, double>& state) const {
    std::vector<double> values(variables_.size(), 0.0);
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto it = state.find(variables_[i]);
        if (it != state.end()) {
            values[i] = it->second;
        } else if (referenced_.count(variables_[i]) != 0) {
            throw Error(ErrorCode::InvalidArgument, "state is missing variable '" + variables_[i] + "'");
        }
    }
    return evaluate(values);
}

}  // namespace v2r::dsl
