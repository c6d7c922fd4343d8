#include "errag/postproc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace errag;

namespace {

EntitySet revenue_data() {
    EntitySet set;
    auto add = [&set](const char* company, const char* revenue) {
        Record rec;
        rec["company"] = Value{std::string(company)};
        rec["revenue"] = Value{std::string(revenue)};
        set.records.push_back(std::move(rec));
    };
    add("Company A", "120M");
    add("Company B", "8500K");
    add("Company C", "95M");
    add("Company D", "40M");
    return set;
}

}  // namespace

//============================================================================
// normalize_number / normalize_date
//============================================================================

TEST(NormalizeNumber, ScaleSuffixes) {
    EXPECT_DOUBLE_EQ(normalize_number("120M"), 120000000.0);
    EXPECT_DOUBLE_EQ(normalize_number("8500K"), 8500000.0);
    EXPECT_DOUBLE_EQ(normalize_number("2b"), 2e9);
    EXPECT_DOUBLE_EQ(normalize_number("8500k"), 8500000.0);
}

TEST(NormalizeNumber, Units) {
    EXPECT_DOUBLE_EQ(normalize_number("5 km"), 5000.0);
    EXPECT_DOUBLE_EQ(normalize_number("5000 m"), 5000.0);
}

TEST(NormalizeNumber, CurrencyAndCommas) {
    EXPECT_DOUBLE_EQ(normalize_number("$1,234.5"), 1234.5);
    EXPECT_DOUBLE_EQ(normalize_number("\xE2\x82\xAC" "99"), 99.0);
}

TEST(NormalizeNumber, BareNumbersPassThrough) {
    EXPECT_DOUBLE_EQ(normalize_number("42"), 42.0);
    EXPECT_DOUBLE_EQ(normalize_number("-3.25"), -3.25);
}

TEST(NormalizeNumber, RejectsGarbage) {
    EXPECT_THROW(normalize_number("abc"), Error);
    EXPECT_THROW(normalize_number(""), Error);
    EXPECT_THROW(normalize_number("12 parsecs"), Error);
}

TEST(NormalizeNumber, CustomUnitTableExtension) {
    UnitTable units = default_unit_table();
    units["mi"] = 1609.0;
    EXPECT_DOUBLE_EQ(normalize_number("2 mi", units), 3218.0);
    EXPECT_DOUBLE_EQ(normalize_number("5 km", units), 5000.0);  // defaults kept
}

TEST(NormalizeNumber, FixedPointOnCanonicalOutput) {
    double v = normalize_number("120M");
    EXPECT_DOUBLE_EQ(normalize_number(format_number(v)), v);
}

TEST(NormalizeDate, Formats) {
    EXPECT_EQ(normalize_date("October 1, 2023"), "2023-10-01");
    EXPECT_EQ(normalize_date("2023-10-01"), "2023-10-01");
    EXPECT_EQ(normalize_date("Oct 1 2023"), "2023-10-01");
    EXPECT_EQ(normalize_date("3/4/2023"), "2023-03-04");   // month-first when ambiguous
    EXPECT_EQ(normalize_date("31/12/2023"), "2023-12-31");  // day-first when unambiguous
}

TEST(NormalizeDate, RejectsInvalid) {
    EXPECT_THROW(normalize_date("31/31/2023"), Error);
    EXPECT_THROW(normalize_date("2023-02-30"), Error);
    EXPECT_THROW(normalize_date("yesterday"), Error);
}

TEST(NormalizeDate, LeapYears) {
    EXPECT_EQ(normalize_date("February 29, 2024"), "2024-02-29");
    EXPECT_THROW(normalize_date("February 29, 2023"), Error);
}

//============================================================================
// Template evaluation
//============================================================================

TEST(Template, RevenueRankingExample) {
    ResultTemplate tpl = parse_template(
        "top-3 by revenue: "
        "{join_str(map(top(sort_by(Data, num(r.revenue), desc), 3), r.company), \", \")}");
    EXPECT_EQ(eval_template(tpl, revenue_data()),
              "top-3 by revenue: Company A, Company C, Company D");
}

TEST(Template, RankingMatchesBruteForceSortOracle) {
    // brute-force oracle: normalize every revenue, sort descending by hand
    EntitySet data = revenue_data();
    std::vector<std::pair<double, std::string>> oracle;
    for (const Record& rec : data.records)
        oracle.emplace_back(-normalize_number(std::get<std::string>(rec.at("revenue"))),
                            std::get<std::string>(rec.at("company")));
    std::stable_sort(oracle.begin(), oracle.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string expected;
    for (std::size_t i = 0; i < 3; ++i) {
        if (i) expected += ", ";
        expected += oracle[i].second;
    }
    std::string got = eval_template(
        parse_template(
            "{join_str(map(top(sort_by(Data, num(r.revenue), desc), 3), r.company), \", \")}"),
        data);
    EXPECT_EQ(got, expected);
}

TEST(Template, EmptyDataFieldAccessYieldsSentinel) {
    EntitySet empty;
    EXPECT_EQ(render_result("{join_str(map(Data, r.company), \",\")} and {sum(map(Data, num(r.x)))}",
                            empty),
              "no data");
}

TEST(Template, PureLiteralPassesThrough) {
    EntitySet empty;
    EXPECT_EQ(render_result("just words, no holes", empty), "just words, no holes");
}

TEST(Template, BraceEscapes) {
    EntitySet empty;
    EXPECT_EQ(render_result("a {{literal}} brace", empty), "a {literal} brace");
}

TEST(Template, ArithmeticAndAggregates) {
    EntitySet data;
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        Record rec;
        rec["v"] = Value{v};
        data.records.push_back(rec);
    }
    EXPECT_EQ(render_result("{sum(map(Data, r.v))}", data), "10");
    EXPECT_EQ(render_result("{avg(map(Data, r.v))}", data), "2.5");
    EXPECT_EQ(render_result("{min(map(Data, r.v))}..{max(map(Data, r.v))}", data), "1..4");
    EXPECT_EQ(render_result("{len(Data)}", data), "4");
    EXPECT_EQ(render_result("{(1 + 2) * 3 - 4 / 2}", data), "7");
    EXPECT_EQ(render_result("{round(2.6)}", data), "3");
    EXPECT_EQ(render_result("{round(2.346, 2)}", data), "2.35");
}

TEST(Template, FilterAndComparisons) {
    EntitySet data;
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        Record rec;
        rec["v"] = Value{v};
        data.records.push_back(rec);
    }
    EXPECT_EQ(render_result("{len(filter(Data, r.v > 2))}", data), "2");
    EXPECT_EQ(render_result("{len(filter(Data, r.v != 3))}", data), "3");
}

TEST(Template, DateNormalizationInsideTemplates) {
    EntitySet data;
    Record a, b;
    a["when"] = Value{std::string("October 1, 2023")};
    b["when"] = Value{std::string("2023-09-30")};
    data.records.push_back(a);
    data.records.push_back(b);
    EXPECT_EQ(render_result("{join_str(map(sort_by(Data, date(r.when)), date(r.when)), \" < \")}",
                            data),
              "2023-09-30 < 2023-10-01");
}

TEST(Template, NamespacedFieldsQuotedAndBare) {
    EntitySet data;
    Record rec;
    rec["g1.price"] = Value{30.48};
    rec["g1.date"] = Value{std::string("2024-10-08")};
    data.records.push_back(rec);
    EXPECT_EQ(render_result("{join_str(map(Data, r.\"g1.price\"), \"\")}", data), "30.48");
    // bare suffix works when unambiguous
    EXPECT_EQ(render_result("{join_str(map(Data, r.price), \"\")}", data), "30.48");
}

TEST(Template, AmbiguousBareFieldIsSentinel) {
    EntitySet data;
    Record rec;
    rec["g1.price"] = Value{1.0};
    rec["g2.price"] = Value{2.0};
    data.records.push_back(rec);
    EXPECT_EQ(render_result("{join_str(map(Data, r.price), \"\")}", data), "no data");
}

TEST(Template, SortIsStable) {
    EntitySet data;
    for (int i = 0; i < 6; ++i) {
        Record rec;
        rec["k"] = Value{double(i % 2)};
        rec["tag"] = Value{std::string(1, char('a' + i))};
        data.records.push_back(rec);
    }
    // equal keys keep insertion order
    EXPECT_EQ(render_result("{join_str(map(sort_by(Data, r.k), r.tag), \"\")}", data), "acebdf");
}

TEST(Template, TopMatchesBruteForceOnRandomData) {
    std::mt19937 rng(21);
    for (int round = 0; round < 50; ++round) {
        EntitySet data;
        std::vector<double> values;
        int n = 1 + int(rng() % 12);
        for (int i = 0; i < n; ++i) {
            double v = double(rng() % 1000) / 4.0;
            values.push_back(v);
            Record rec;
            rec["v"] = Value{v};
            data.records.push_back(rec);
        }
        std::size_t k = 1 + rng() % 5;
        std::vector<double> sorted = values;
        std::stable_sort(sorted.begin(), sorted.end());
        sorted.resize(std::min(k, sorted.size()));
        std::string expected;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (i) expected += ",";
            expected += format_number(sorted[i]);
        }
        std::string tpl = "{join_str(map(top(sort_by(Data, r.v), " + std::to_string(k) +
                          "), r.v), \",\")}";
        ASSERT_EQ(render_result(tpl, data), expected) << "round " << round;
    }
}

TEST(Template, EvalNeverThrows) {
    EntitySet empty;
    EXPECT_EQ(render_result("{num(\"abc\")}", empty), "no data");
    EXPECT_EQ(render_result("{date(\"not a date\")}", empty), "no data");
    EXPECT_EQ(render_result("{1 / 0}", empty), "no data");
    EXPECT_EQ(render_result("{sum(Data)}", empty), "no data");
    EXPECT_EQ(render_result("{r.field}", empty), "no data");  // r outside per-record context
}

TEST(Template, ArbitraryCodeIsRejectedAtParse) {
    EXPECT_THROW(parse_template("{__import__(\"os\").system(\"rm\")}"), Error);
    EXPECT_THROW(parse_template("{open(\"/etc/passwd\")}"), Error);
    EXPECT_THROW(parse_template("{Data.__class__}"), Error);
    EXPECT_THROW(parse_template("{lambda: 1}"), Error);
    EXPECT_THROW(parse_template("{unclosed"), Error);
}

TEST(Template, ArityErrorsAtParse) {
    EXPECT_THROW(parse_template("{top(Data)}"), Error);
    EXPECT_THROW(parse_template("{len()}"), Error);
    EXPECT_THROW(parse_template("{sort_by(Data, r.v, desc, 4)}"), Error);
}
