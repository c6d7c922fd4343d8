#include "errag/catalog.hpp"

#include <gtest/gtest.h>

using namespace errag;

namespace {

SourceDescriptor finance_source() {
    SourceDescriptor desc;
    desc.name = "DB_Finance";
    desc.kind = SourceKind::Relational;
    desc.schema_summary = "stock prices and events";
    for (int i = 0; i < 6; ++i) {
        TableStats t;
        t.table = "t" + std::to_string(i);
        t.row_count = 100;
        ColumnStats c;
        c.column = "symbol";
        c.distinct_count = 20;
        c.min = 1.0;
        c.max = 9.0;
        t.columns.push_back(c);
        desc.tables.push_back(std::move(t));
    }
    return desc;
}

}  // namespace

TEST(Catalog, RegisterAndLookup) {
    Catalog catalog;
    catalog.register_source(finance_source());
    EXPECT_TRUE(catalog.has_source("DB_Finance"));
    EXPECT_EQ(catalog.source("DB_Finance").tables.size(), 6u);
}

TEST(Catalog, DuplicateRegistrationFails) {
    Catalog catalog;
    catalog.register_source(finance_source());
    try {
        catalog.register_source(finance_source());
        FAIL() << "expected DuplicateSource";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DuplicateSource);
    }
}

TEST(Catalog, SelfSourceParticipatesWithZeroLatency) {
    Catalog catalog;
    SourceDescriptor self;
    self.name = "SELF";
    self.kind = SourceKind::Self;
    self.schema_summary = "model internal knowledge";
    catalog.register_source(self);
    EXPECT_EQ(catalog.source("SELF").typical_latency_ms, 0.0);
}

TEST(Catalog, ColumnStatsLookup) {
    Catalog catalog;
    catalog.register_source(finance_source());
    auto stats = catalog.column_stats("DB_Finance", "t0", "symbol");
    ASSERT_TRUE(stats.has_value());
    EXPECT_EQ(stats->distinct_count, 20u);

    EXPECT_FALSE(catalog.column_stats("DB_Finance", "t0", "missing").has_value());
    EXPECT_FALSE(catalog.column_stats("DB_Finance", "no_table", "symbol").has_value());
}

TEST(Catalog, ColumnStatsErrors) {
    Catalog catalog;
    SourceDescriptor self;
    self.name = "SELF";
    self.kind = SourceKind::Self;
    catalog.register_source(self);
    try {
        catalog.column_stats("missing", "t", "c");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownSource);
    }
    try {
        catalog.column_stats("SELF", "t", "c");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NotRelational);
    }
}

TEST(Catalog, InvariantsEnforced) {
    Catalog catalog;
    SourceDescriptor bad = finance_source();
    bad.name = "bad";
    bad.tables[0].columns[0].min = 10.0;
    bad.tables[0].columns[0].max = 1.0;
    EXPECT_THROW(catalog.register_source(bad), Error);

    SourceDescriptor worse = finance_source();
    worse.name = "worse";
    worse.tables[0].columns[0].min.reset();
    worse.tables[0].columns[0].max.reset();
    worse.tables[0].columns[0].distinct_count = 1000;  // > row_count
    EXPECT_THROW(catalog.register_source(worse), Error);
}

TEST(Catalog, RegistrationOrderDoesNotAffectLookups) {
    SourceDescriptor a = finance_source();
    SourceDescriptor b;
    b.name = "WIKI";
    b.kind = SourceKind::KnowledgeGraph;
    b.schema_summary = "encyclopedia pages";

    Catalog first;
    first.register_source(a);
    first.register_source(b);
    Catalog second;
    second.register_source(b);
    second.register_source(a);

    EXPECT_EQ(first.source_names(), second.source_names());
    EXPECT_EQ(first.column_stats("DB_Finance", "t0", "symbol")->distinct_count,
              second.column_stats("DB_Finance", "t0", "symbol")->distinct_count);
}
