#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <optional>
#include <random>

#include "dsl_oracle.hpp"
#include "v2r/reward_dsl.hpp"

using namespace v2r;
using namespace v2r::dsl;
using v2r::testing::AstGen;
using v2r::testing::Oracle;

namespace {

const std::vector<std::string> kVars{"vx", "vy", "h", "knee"};

double eval(std::string_view src, const std::map<std::string, double>& state) {
    return compile_reward(src, kVars).evaluate(state);
}

template <class Fn>
std::optional<DslError> dsl_error(Fn&& fn) {
    try {
        fn();
    } catch (const DslError& e) {
        return e;
    }
    return std::nullopt;
}

}  // namespace

TEST(DslParse, PrecedenceExample) {
    const auto p = parse("1 + 2*3");
    EXPECT_TRUE(p.bindings.empty());
    EXPECT_EQ(compile_reward("1 + 2*3", kVars).evaluate(std::map<std::string, double>{}), 7.0);
    EXPECT_EQ(pretty_print(p), "(1 + (2 * 3))");
}

TEST(DslParse, LetBindingExample) {
    const auto p = parse("let e = vx - 2.0\nexp(-abs(e))");
    ASSERT_EQ(p.bindings.size(), 1u);
    EXPECT_EQ(p.bindings[0].name, "e");
    const auto expected = Expr::call(
        Func::Exp, {Expr::negate(Expr::call(Func::Abs, {Expr::variable("e")}))});
    EXPECT_TRUE(structurally_equal(p.body, expected));
}

TEST(DslParse, AssociativityAndUnaryMinus) {
    EXPECT_EQ(pretty_print(parse("1 - 2 - 3")), "((1 - 2) - 3)");
    EXPECT_EQ(pretty_print(parse("8 / 4 / 2")), "((8 / 4) / 2)");
    EXPECT_EQ(pretty_print(parse("-vx")), "(-vx)");
    EXPECT_EQ(pretty_print(parse("-2 * 3")), "((-2) * 3)");
    EXPECT_EQ(pretty_print(parse("  1\t+\n2 ")), pretty_print(parse("1+2")));
}

TEST(DslParse, ArityErrorPointsAtCall) {
    const auto err = dsl_error([] { parse("exp(1, 2)"); });
    ASSERT_TRUE(err);
    EXPECT_EQ(err->code(), ErrorCode::Arity);
    EXPECT_EQ(err->position().offset, 0u);
    const auto clamp_err = dsl_error([] { parse("1 + clamp(vx, 0)"); });
    ASSERT_TRUE(clamp_err);
    EXPECT_EQ(clamp_err->code(), ErrorCode::Arity);
    EXPECT_EQ(clamp_err->position().column, 5u);
    EXPECT_EQ(dsl_error([] { parse("tanh()"); })->code(), ErrorCode::Arity);
    EXPECT_EQ(dsl_error([] { parse("if()"); })->code(), ErrorCode::Arity);
}

TEST(DslParse, SyntaxErrorPositionAndExpectation) {
    const auto err = dsl_error([] { parse("1 +"); });
    ASSERT_TRUE(err);
    EXPECT_EQ(err->code(), ErrorCode::Syntax);
    EXPECT_EQ(err->position().offset, 3u);
    EXPECT_NE(std::string(err->what()).find("expected"), std::string::npos);

    const auto second_line = dsl_error([] { parse("let a = 1\n(a * 2"); });
    ASSERT_TRUE(second_line);
    EXPECT_EQ(second_line->position().line, 2u);
}

TEST(DslParse, LexicalErrorNamesText) {
    const auto err = dsl_error([] { parse("vx $ 2"); });
    ASSERT_TRUE(err);
    EXPECT_EQ(err->code(), ErrorCode::Lexical);
    EXPECT_EQ(err->position().column, 4u);
    EXPECT_NE(std::string(err->what()).find('$'), std::string::npos);
    EXPECT_EQ(dsl_error([] { parse("1e+"); })->code(), ErrorCode::Lexical);
}

TEST(DslParse, ComparisonOnlyInsideIf) {
    EXPECT_EQ(dsl_error([] { parse("vx < 1"); })->code(), ErrorCode::Syntax);
    EXPECT_EQ(dsl_error([] { parse("if(1, 2, 3)"); })->code(), ErrorCode::Syntax);
    EXPECT_EQ(dsl_error([] { parse("exp(vx < 1)"); })->code(), ErrorCode::Syntax);
    EXPECT_NO_THROW(parse("if(vx <= 1, 2, 3)"));
}

TEST(DslParse, EmptyAndTrailingInput) {
    EXPECT_TRUE(dsl_error([] { parse(""); }));
    EXPECT_TRUE(dsl_error([] { parse("let a = 1"); }));
    EXPECT_TRUE(dsl_error([] { parse("1 2"); }));
}

TEST(DslCheck, ValidProgramRecordsVariables) {
    const auto p = compile_reward("vx", kVars);
    EXPECT_EQ(p.referenced_vars(), std::set<std::string>{"vx"});
    const auto q = compile_reward("let a = h * 2\nvx + a", kVars);
    EXPECT_EQ(q.referenced_vars(), (std::set<std::string>{"h", "vx"}));
}

TEST(DslCheck, UnknownVariable) {
    const auto err = dsl_error([] { compile_reward("1 + vq", kVars); });
    ASSERT_TRUE(err);
    EXPECT_EQ(err->code(), ErrorCode::UnknownVariable);
    EXPECT_NE(std::string(err->what()).find("vq"), std::string::npos);
    EXPECT_EQ(err->position().column, 5u);
}

TEST(DslCheck, BindingRules) {
    EXPECT_EQ(dsl_error([] { compile_reward("let a = 1\nlet a = 2\na", kVars); })->code(),
              ErrorCode::DuplicateBinding);
    EXPECT_EQ(dsl_error([] { compile_reward("let vx = 1\nvx", kVars); })->code(), ErrorCode::Shadowing);
    // A binding cannot see itself or later bindings.
    EXPECT_EQ(dsl_error([] { compile_reward("let a = b\nlet b = 1\na", kVars); })->code(),
              ErrorCode::UnknownVariable);
    EXPECT_EQ(dsl_error([] { compile_reward("let a = a\na", kVars); })->code(), ErrorCode::UnknownVariable);
}

TEST(DslCheck, CountsDivisions) {
    EXPECT_EQ(compile_reward("vx / h + 1 / (vy - 2)", kVars).guarded_divisions(), 2u);
    EXPECT_EQ(compile_reward("vx", kVars).guarded_divisions(), 0u);
}

TEST(DslEvaluate, SpecExamples) {
    EXPECT_EQ(eval("exp(-abs(vx - 2.0))", {{"vx", 2.0}}), 1.0);
    EXPECT_EQ(eval("if(h < 0.3, -1.0, 0.0)", {{"h", 0.5}}), 0.0);
    EXPECT_EQ(eval("if(h < 0.3, -1.0, 0.0)", {{"h", 0.1}}), -1.0);
    for (double vx : {0.0, 1.0, -3.5}) {
        try {
            eval("1.0 / (vx - vx)", {{"vx", vx}});
            FAIL() << "no guard";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::GuardedDivision);
        }
    }
}

TEST(DslEvaluate, GuardThresholdAndNonFinite) {
    EXPECT_NO_THROW(eval("1 / h", {{"h", 1e-9}}));
    EXPECT_THROW(eval("1 / h", {{"h", 9.9e-10}}), Error);
    try {
        eval("exp(vx)", {{"vx", 1000.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    }
    try {
        eval("sqrt(vx)", {{"vx", -1.0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    }
}

TEST(DslEvaluate, UntakenBranchIsNotEvaluated) {
    EXPECT_EQ(eval("if(vx > 0, 1, 1 / (vx - vx))", {{"vx", 1.0}}), 1.0);
}

TEST(DslEvaluate, MissingReferencedVariable) {
    EXPECT_THROW(eval("vx + h", {{"vx", 1.0}}), Error);
    EXPECT_EQ(eval("vx", {{"vx", 1.0}}), 1.0);  // unreferenced variables may be absent
}

TEST(DslEvaluate, ClampStaysInBounds) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    const auto p = compile_reward("clamp(vx, vy, h)", kVars);
    for (int i = 0; i < 2000; ++i) {
        double lo = u(rng), hi = u(rng);
        if (lo > hi) std::swap(lo, hi);
        const double r = p.evaluate(std::map<std::string, double>{{"vx", u(rng)}, {"vy", lo}, {"h", hi}});
        EXPECT_GE(r, lo);
        EXPECT_LE(r, hi);
    }
}

TEST(DslRoundTrip, RandomAsts) {
    AstGen gen(42, kVars);
    for (int i = 0; i < 1000; ++i) {
        const auto p = gen.program();
        const auto text = pretty_print(p);
        ParsedProgram back;
        ASSERT_NO_THROW(back = parse(text)) << text;
        EXPECT_TRUE(structurally_equal(p, back)) << text;
        EXPECT_EQ(pretty_print(back), text);
    }
}

TEST(DslEvaluate, AgreesWithTreeWalker) {
    AstGen gen(43, kVars);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::size_t errors = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto parsed = gen.program();
        const auto program = check(parse(pretty_print(parsed)), kVars);
        std::map<std::string, double> state;
        for (const auto& v : kVars) state[v] = u(gen.rng);

        Oracle oracle{state};
        const auto expected = oracle.run(parsed);
        std::optional<ErrorCode> got_error;
        double got = 0.0;
        try {
            got = program.evaluate(state);
        } catch (const Error& e) {
            got_error = e.code();
        }
        const auto text = pretty_print(parsed);
        ASSERT_EQ(got_error, expected.error) << text;
        if (!got_error) {
            EXPECT_TRUE(std::isfinite(got));
            EXPECT_EQ(got, expected.value) << text;
            // Bit-for-bit repeatable.
            EXPECT_EQ(program.evaluate(state), got);
        } else {
            ++errors;
        }
    }
    // Both outcomes must be exercised for the comparison to mean anything.
    EXPECT_GT(errors, 0u);
    EXPECT_LT(errors, 900u);
}
