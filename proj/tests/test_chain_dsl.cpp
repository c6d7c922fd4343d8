#include "errag/chain_dsl.hpp"

#include <gtest/gtest.h>

#include "support/generators.hpp"

using namespace errag;

TEST(ChainDsl, ParsesSemanticJoinChain) {
    ApiChain chain = parse_chain(
        "GET(WIKI, search_key = \"DeepMind\", {content})"
        ".JOIN(content, parent_company, search_key)"
        ".GET(WIKI, , {search_key, content})");
    ASSERT_EQ(chain.nodes.size(), 2u);
    ASSERT_EQ(chain.edges.size(), 1u);

    const GetNode& first = chain.nodes[0];
    EXPECT_EQ(first.alias, "g1");
    EXPECT_EQ(first.source, "WIKI");
    ASSERT_TRUE(first.condition.has_value());
    EXPECT_EQ(*first.condition,
              Condition::cmp("search_key", CmpOp::Eq, Value{std::string("DeepMind")}));
    EXPECT_EQ(first.attributes, (std::vector<std::string>{"content"}));

    const GetNode& second = chain.nodes[1];
    EXPECT_FALSE(second.condition.has_value());  // empty condition is legal on a joined GET
    EXPECT_EQ(second.attributes, (std::vector<std::string>{"content", "search_key"}));

    EXPECT_EQ(chain.edges[0], JoinEdge::semantic("content", "parent_company", "search_key"));
}

TEST(ChainDsl, ParsesSingleGetWithTableConjunction) {
    ApiChain chain = parse_chain(
        "GET(DB_Finance, table = \"stock\" AND symbol = \"AAPL\", {price, date})");
    ASSERT_EQ(chain.nodes.size(), 1u);
    EXPECT_TRUE(chain.edges.empty());
    const Condition& cond = *chain.nodes[0].condition;
    ASSERT_EQ(cond.kind, Condition::Kind::And);
    ASSERT_EQ(cond.children.size(), 2u);
    EXPECT_EQ(cond.children[0], Condition::cmp("table", CmpOp::Eq, Value{std::string("stock")}));
    EXPECT_EQ(cond.children[1], Condition::cmp("symbol", CmpOp::Eq, Value{std::string("AAPL")}));
}

TEST(ChainDsl, ParsesRelationalJoinSpec) {
    ApiChain chain = parse_chain("GET(A, x = 1, {x}).JOIN(left.x = right.y).GET(B, , {y})");
    ASSERT_EQ(chain.edges.size(), 1u);
    EXPECT_EQ(chain.edges[0], JoinEdge::relational("x", CmpOp::Eq, "y"));
}

TEST(ChainDsl, RendersCanonicalFormWithSortedAttributes) {
    ApiChain chain = parse_chain(
        "GET(DB_Finance, table = \"stock\" AND symbol = \"AAPL\", {price, date})");
    EXPECT_EQ(render_chain(chain),
              "GET(DB_Finance, table = \"stock\" AND symbol = \"AAPL\", {date, price})");
}

TEST(ChainDsl, RendersEmptyCondition) {
    ApiChain chain = parse_chain("GET(B, , {y})");
    EXPECT_EQ(render_chain(chain), "GET(B, , {y})");
}

TEST(ChainDsl, AutoAddsJoinAttributesAsInternal) {
    ApiChain chain = parse_chain("GET(A, x = 1, {z}).JOIN(left.x = right.y).GET(B, , {w})");
    EXPECT_TRUE(chain.nodes[0].has_attribute("x"));
    EXPECT_TRUE(chain.nodes[0].internal_attrs.count("x"));
    EXPECT_TRUE(chain.nodes[1].has_attribute("y"));
    // render omits internals, reparse restores them
    ApiChain again = parse_chain(render_chain(chain));
    EXPECT_EQ(chain, again);
}

TEST(ChainDsl, ExplicitAliasRoundTrips) {
    ApiChain chain = parse_chain("GET(A, x = 1, {x}) AS lookup");
    EXPECT_EQ(chain.nodes[0].alias, "lookup");
    EXPECT_EQ(render_chain(chain), "GET(A, x = 1, {x}) AS lookup");
    EXPECT_EQ(parse_chain(render_chain(chain)), chain);
}

TEST(ChainDsl, DuplicateAliasIsValidationError) {
    try {
        parse_chain("GET(A, , {x}) AS dup.JOIN(left.x = right.x).GET(B, , {x}) AS dup");
        FAIL() << "expected ValidationError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ValidationError);
    }
}

TEST(ChainDsl, EmptyAttributeSetIsValidationError) {
    try {
        parse_chain("GET(A, x = 1, {})");
        FAIL() << "expected ValidationError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ValidationError);
    }
}

TEST(ChainDsl, SyntaxErrorCarriesPosition) {
    try {
        parse_chain("GET(A, x = , {x})");
        FAIL() << "expected SyntaxError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SyntaxError);
        ASSERT_TRUE(e.position().has_value());
        EXPECT_EQ(*e.position(), 11u);
    }
}

TEST(ChainDsl, EmptyInputIsSyntaxError) {
    EXPECT_THROW(parse_chain(""), Error);
}

TEST(ChainDsl, ConditionPrecedenceNotOverAndOverOr) {
    Condition c = parse_condition("NOT a = 1 AND b = 2 OR c = 3");
    // ((NOT a=1) AND b=2) OR c=3
    ASSERT_EQ(c.kind, Condition::Kind::Or);
    ASSERT_EQ(c.children.size(), 2u);
    EXPECT_EQ(c.children[0].kind, Condition::Kind::And);
    EXPECT_EQ(c.children[0].children[0].kind, Condition::Kind::Not);
}

TEST(ChainDsl, ParenthesizedOrInsideAndRoundTrips) {
    Condition c = parse_condition("(a = 1 OR b = 2) AND c = 3");
    ASSERT_EQ(c.kind, Condition::Kind::And);
    EXPECT_EQ(render_condition(c), "(a = 1 OR b = 2) AND c = 3");
}

TEST(ChainDsl, StringEscapesRoundTrip) {
    Condition c = parse_condition("a = \"x\\\"y\\\\z\\n\"");
    EXPECT_EQ(std::get<std::string>(c.literal), "x\"y\\z\n");
    Condition again = parse_condition(render_condition(c));
    EXPECT_EQ(c, again);
}

TEST(ChainDsl, NullLiteralRoundTrips) {
    Condition c = parse_condition("a = null");
    EXPECT_TRUE(is_null(c.literal));
    EXPECT_EQ(render_condition(c), "a = null");
}

TEST(ChainDsl, DeepNestingIsRejectedNotCrashing) {
    std::string text = "GET(A, ";
    for (int i = 0; i < 5000; ++i) text += "(";
    text += "x = 1";
    for (int i = 0; i < 5000; ++i) text += ")";
    text += ", {x})";
    try {
        parse_chain(text);
        FAIL() << "expected SyntaxError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SyntaxError);
    }
}

TEST(ChainDsl, ChainArityInvariant) {
    errag::testing::Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        ApiChain chain = errag::testing::random_chain(rng);
        EXPECT_EQ(chain.edges.size() + 1, chain.nodes.size());
    }
}

// Round-trip property over generated ASTs (the acceptance suite scales this
// to 10k instances).
TEST(ChainDsl, RoundTripFuzz) {
    errag::testing::Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        ApiChain chain = errag::testing::random_chain(rng);
        std::string text = render_chain(chain);
        ApiChain reparsed;
        try {
            reparsed = parse_chain(text);
        } catch (const Error& e) {
            FAIL() << "iteration " << i << ": render produced unparseable text: " << e.what()
                   << "\n" << text;
        }
        ASSERT_EQ(chain, reparsed) << "iteration " << i << "\n" << text;
    }
}

// Parser totality: arbitrary bytes either parse or raise SyntaxError /
// ValidationError; nothing else escapes.
TEST(ChainDsl, ParserTotalityOnNoise) {
    errag::testing::Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        std::string noise = i % 2 == 0 ? errag::testing::random_bytes(rng, 512)
                                       : errag::testing::random_chainlike_noise(rng);
        try {
            (void)parse_chain(noise);
        } catch (const Error&) {
            // expected path
        }
    }
    SUCCEED();
}
