#include <array>
#include <charconv>
#include <cmath>
#include <optional>

#include "v2r/reward_dsl.hpp"

namespace v2r::dsl {

namespace {

constexpr std::string_view kGrammar =
    "program  := (let_stmt NEWLINE)* expr\n"
    "let_stmt := \"let\" IDENT \"=\" expr\n"
    "expr     := term ((\"+\"|\"-\") term)*\n"
    "term     := factor ((\"*\"|\"/\") factor)*\n"
    "factor   := \"-\" factor | NUMBER | IDENT | call | \"(\" expr \")\"\n"
    "call     := FUNC \"(\" args \")\"   with FUNC in {exp,abs,sqrt,min,max,tanh,clamp,if}\n"
    "cond     := expr (\"<\"|\"<=\"|\">\"|\">=\"|\"==\") expr      (only as first arg of if)\n";

constexpr std::array<std::pair<std::string_view, Func>, 8> kFuncs{{
    {"exp", Func::Exp},
    {"abs", Func::Abs},
    {"sqrt", Func::Sqrt},
    {"min", Func::Min},
    {"max", Func::Max},
    {"tanh", Func::Tanh},
    {"clamp", Func::Clamp},
    {"if", Func::If},
}};

std::optional<Func> lookup_func(std::string_view name) {
    for (const auto& [n, f] : kFuncs) {
        if (n == name) return f;
    }
    return std::nullopt;
}

enum class Tok {
    Number, Ident, Let, Plus, Minus, Star, Slash, LParen, RParen, Comma,
    Lt, Le, Gt, Ge, EqEq, Assign, Newline, End,
};

std::string_view describe(Tok t) {
    switch (t) {
        case Tok::Number: return "number";
        case Tok::Ident: return "identifier";
        case Tok::Let: return "'let'";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::Comma: return "','";
        case Tok::Lt: return "'<'";
        case Tok::Le: return "'<='";
        case Tok::Gt: return "'>'";
        case Tok::Ge: return "'>='";
        case Tok::EqEq: return "'=='";
        case Tok::Assign: return "'='";
        case Tok::Newline: return "newline";
        case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind;
    std::string text;
    double value = 0.0;
    SourcePos pos;
};

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    SourcePos pos;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i] == '\n') {
                ++pos.line;
                pos.column = 1;
            } else {
                ++pos.column;
            }
            ++i;
            pos.offset = i;
        }
    };

    while (i < src.size()) {
        const char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            advance(1);
            continue;
        }
        const SourcePos start = pos;
        if (c == '\n') {
            out.push_back({Tok::Newline, "\n", 0.0, start});
            advance(1);
            continue;
        }
        if (digit(c) || (c == '.' && i + 1 < src.size() && digit(src[i + 1]))) {
            std::size_t j = i;
            while (j < src.size() && digit(src[j])) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && digit(src[j])) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && digit(src[k])) {
                    while (k < src.size() && digit(src[k])) ++k;
                    j = k;
                } else {
                    throw DslError(ErrorCode::Lexical, start,
                                   "lexical error at " + to_string(start) + ": malformed exponent in '" +
                                       std::string(src.substr(i, k - i)) + "'");
                }
            }
            const std::string text(src.substr(i, j - i));
            double value = 0.0;
            const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
            if (res.ec != std::errc{} || !std::isfinite(value)) {
                throw DslError(ErrorCode::Lexical, start,
                               "lexical error at " + to_string(start) + ": bad number '" + text + "'");
            }
            out.push_back({Tok::Number, text, value, start});
            advance(j - i);
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            std::string text(src.substr(i, j - i));
            out.push_back({text == "let" ? Tok::Let : Tok::Ident, text, 0.0, start});
            advance(j - i);
            continue;
        }
        auto two = [&](char next) { return i + 1 < src.size() && src[i + 1] == next; };
        Tok kind;
        std::size_t len = 1;
        switch (c) {
            case '+': kind = Tok::Plus; break;
            case '-': kind = Tok::Minus; break;
            case '*': kind = Tok::Star; break;
            case '/': kind = Tok::Slash; break;
            case '(': kind = Tok::LParen; break;
            case ')': kind = Tok::RParen; break;
            case ',': kind = Tok::Comma; break;
            case '<':
                kind = two('=') ? Tok::Le : Tok::Lt;
                len = two('=') ? 2 : 1;
                break;
            case '>':
                kind = two('=') ? Tok::Ge : Tok::Gt;
                len = two('=') ? 2 : 1;
                break;
            case '=':
                kind = two('=') ? Tok::EqEq : Tok::Assign;
                len = two('=') ? 2 : 1;
                break;
            default:
                throw DslError(ErrorCode::Lexical, start,
                               "lexical error at " + to_string(start) + ": unexpected character '" +
                                   std::string(1, c) + "'");
        }
        out.push_back({kind, std::string(src.substr(i, len)), 0.0, start});
        advance(len);
    }
    out.push_back({Tok::End, "", 0.0, pos});
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    ParsedProgram program() {
        ParsedProgram out;
        skip_newlines();
        while (peek().kind == Tok::Let) {
            const Token let_tok = take();
            const Token name = expect(Tok::Ident);
            if (lookup_func(name.text)) {
                throw DslError(ErrorCode::Syntax, name.pos,
                               "syntax error at " + to_string(name.pos) + ": '" + name.text +
                                   "' is a reserved function name");
            }
            expect(Tok::Assign);
            skip_newlines();
            Expr value = expr();
            if (peek().kind != Tok::Newline) fail({Tok::Newline});
            skip_newlines();
            out.bindings.push_back({name.text, std::move(value), let_tok.pos});
        }
        out.body = expr();
        skip_newlines();
        if (peek().kind != Tok::End) fail({Tok::End, Tok::Plus, Tok::Minus, Tok::Star, Tok::Slash});
        return out;
    }

private:
    const Token& peek() {
        if (depth_ > 0) {
            while (tokens_[pos_].kind == Tok::Newline) ++pos_;
        }
        return tokens_[pos_];
    }

    Token take() {
        Token t = peek();
        if (t.kind != Tok::End) ++pos_;
        if (t.kind == Tok::LParen) ++depth_;
        if (t.kind == Tok::RParen && depth_ > 0) --depth_;
        return t;
    }

    void skip_newlines() {
        while (tokens_[pos_].kind == Tok::Newline) ++pos_;
    }

    [[noreturn]] void fail(std::initializer_list<Tok> expected) {
        const Token& got = peek();
        std::string msg = "syntax error at " + to_string(got.pos) + ": expected ";
        bool first = true;
        for (Tok t : expected) {
            if (!first) msg += " or ";
            first = false;
            msg += describe(t);
        }
        msg += ", got ";
        msg += got.kind == Tok::End || got.kind == Tok::Newline ? std::string(describe(got.kind))
                                                                : "'" + got.text + "'";
        throw DslError(ErrorCode::Syntax, got.pos, msg);
    }

    Token expect(Tok kind) {
        if (peek().kind != kind) fail({kind});
        return take();
    }

    Expr expr() {
        Expr lhs = term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            const Token op = take();
            skip_newlines();
            Expr rhs = term();
            lhs = Expr::binary(op.kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub, std::move(lhs),
                               std::move(rhs), op.pos);
        }
        return lhs;
    }

    Expr term() {
        Expr lhs = factor();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            const Token op = take();
            skip_newlines();
            Expr rhs = factor();
            lhs = Expr::binary(op.kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div, std::move(lhs),
                               std::move(rhs), op.pos);
        }
        return lhs;
    }

    Expr factor() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Minus: {
                const Token op = take();
                return Expr::negate(factor(), op.pos);
            }
            case Tok::Number: {
                const Token num = take();
                return Expr::literal(num.value, num.pos);
            }
            case Tok::Ident: {
                const Token id = take();
                const auto func = lookup_func(id.text);
                if (func) return call(*func, id);
                if (peek().kind == Tok::LParen) {
                    throw DslError(ErrorCode::Syntax, id.pos,
                                   "syntax error at " + to_string(id.pos) + ": unknown function '" +
                                       id.text + "'");
                }
                return Expr::variable(id.text, id.pos);
            }
            case Tok::LParen: {
                take();
                Expr inner = expr();
                expect(Tok::RParen);
                return inner;
            }
            default:
                fail({Tok::Number, Tok::Ident, Tok::LParen, Tok::Minus});
        }
    }

    Expr call(Func func, const Token& name) {
        expect(Tok::LParen);
        std::vector<Expr> args;
        if (peek().kind != Tok::RParen) {
            args.push_back(func == Func::If ? condition() : expr());
            while (peek().kind == Tok::Comma) {
                take();
                args.push_back(expr());
            }
            if (peek().kind != Tok::RParen) fail({Tok::Comma, Tok::RParen});
        }
        take();
        if (args.size() != arity(func)) {
            throw DslError(ErrorCode::Arity, name.pos,
                           "arity error at " + to_string(name.pos) + ": '" + name.text + "' takes " +
                               std::to_string(arity(func)) + " argument(s), got " +
                               std::to_string(args.size()));
        }
        return Expr::call(func, std::move(args), name.pos);
    }

    Expr condition() {
        Expr lhs = expr();
        CompareOp op;
        switch (peek().kind) {
            case Tok::Lt: op = CompareOp::Lt; break;
            case Tok::Le: op = CompareOp::Le; break;
            case Tok::Gt: op = CompareOp::Gt; break;
            case Tok::Ge: op = CompareOp::Ge; break;
            case Tok::EqEq: op = CompareOp::Eq; break;
            default: fail({Tok::Lt, Tok::Le, Tok::Gt, Tok::Ge, Tok::EqEq});
        }
        const Token op_tok = take();
        Expr rhs = expr();
        return Expr::compare(op, std::move(lhs), std::move(rhs), op_tok.pos);
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

void print(const Expr& e, std::string& out) {
    switch (e.kind) {
        case ExprKind::Number: {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof buf, e.number);
            out.append(buf, res.ptr);
            return;
        }
        case ExprKind::Variable:
            out += e.name;
            return;
        case ExprKind::Negate:
            out += "(-";
            print(e.args[0], out);
            out += ')';
            return;
        case ExprKind::Binary:
            out += '(';
            print(e.args[0], out);
            out += ' ';
            out += to_string(e.binary_op);
            out += ' ';
            print(e.args[1], out);
            out += ')';
            return;
        case ExprKind::Compare:
            print(e.args[0], out);
            out += ' ';
            out += to_string(e.compare_op);
            out += ' ';
            print(e.args[1], out);
            return;
        case ExprKind::Call:
            out += to_string(e.func);
            out += '(';
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i > 0) out += ", ";
                print(e.args[i], out);
            }
            out += ')';
            return;
    }
}

}  // namespace

std::string_view grammar_text() noexcept { return kGrammar; }

std::string to_string(const SourcePos& pos) {
    return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

std::string_view to_string(BinaryOp op) noexcept {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
    }
    return "?";
}

std::string_view to_string(CompareOp op) noexcept {
    switch (op) {
        case CompareOp::Lt: return "<";
        case CompareOp::Le: return "<=";
        case CompareOp::Gt: return ">";
        case CompareOp::Ge: return ">=";
        case CompareOp::Eq: return "==";
    }
    return "?";
}

std::string_view to_string(Func f) noexcept {
    for (const auto& [n, fn] : kFuncs) {
        if (fn == f) return n;
    }
    return "?";
}

std::size_t arity(Func f) noexcept {
    switch (f) {
        case Func::Exp:
        case Func::Abs:
        case Func::Sqrt:
        case Func::Tanh: return 1;
        case Func::Min:
        case Func::Max: return 2;
        case Func::Clamp:
        case Func::If: return 3;
    }
    return 0;
}

Expr Expr::literal(double v, SourcePos pos) {
    Expr e;
    e.kind = ExprKind::Number;
    e.number = v;
    e.pos = pos;
    return e;
}

Expr Expr::variable(std::string name, SourcePos pos) {
    Expr e;
    e.kind = ExprKind::Variable;
    e.name = std::move(name);
    e.pos = pos;
    return e;
}

Expr Expr::negate(Expr operand, SourcePos pos) {
    Expr e;
    e.kind = ExprKind::Negate;
    e.args.push_back(std::move(operand));
    e.pos = pos;
    return e;
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs, SourcePos pos) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.binary_op = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    e.pos = pos;
    return e;
}

Expr Expr::compare(CompareOp op, Expr lhs, Expr rhs, SourcePos pos) {
    Expr e;
    e.kind = ExprKind::Compare;
    e.compare_op = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    e.pos = pos;
    return e;
}

Expr Expr::call(Func f, std::vector<Expr> args, SourcePos pos) {
    Expr e;
    e.kind = ExprKind::Call;
    e.func = f;
    e.args = std::move(args);
    e.pos = pos;
    return e;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    switch (a.kind) {
        case ExprKind::Number:
            if (a.number != b.number) return false;
            break;
        case ExprKind::Variable:
            if (a.name != b.name) return false;
            break;
        case ExprKind::Binary:
            if (a.binary_op != b.binary_op) return false;
            break;
        case ExprKind::Compare:
            if (a.compare_op != b.compare_op) return false;
            break;
        case ExprKind::Call:
            if (a.func != b.func) return false;
            break;
        case ExprKind::Negate:
            break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!structurally_equal(a.args[i], b.args[i])) return false;
    }
    return true;
}

bool structurally_equal(const ParsedProgram& a, const ParsedProgram& b) {
    if (a.bindings.size() != b.bindings.size()) return false;
    for (std::size_t i = 0; i < a.bindings.size(); ++i) {
        if (a.bindings[i].name != b.bindings[i].name) return false;
        if (!structurally_equal(a.bindings[i].value, b.bindings[i].value)) return false;
    }
    return structurally_equal(a.body, b.body);
}

ParsedProgram parse(std::string_view source) {
    Parser parser(lex(source));
    ParsedProgram out = parser.program();
    out.source = std::string(source);
    return out;
}

std::string pretty_print(const Expr& expr) {
    std::string out;
    print(expr, out);
    return out;
}

std::string pretty_print(const ParsedProgram& program) {
    std::string out;
    for (const auto& b : program.bindings) {
        out += "let ";
        out += b.name;
        out += " = ";
        print(b.value, out);
        out += '\n';
    }
    print(program.body, out);
    return out;
}

}  // namespace v2r::dsl
