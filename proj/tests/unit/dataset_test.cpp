#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "negfactor_testing.hpp"

using namespace negfactor;
namespace nt = negfactor::testing;

namespace {

const char* kHeader = "verb,frame,subject,tense,participant,negraising,acceptability\n";

ResponseTable parse(const std::string& text, const LoadOptions& options = {},
                    LoadStats* stats = nullptr, const CsvSchema& schema = {}) {
    std::istringstream in(text);
    return read_csv(in, schema, options, stats);
}

} // namespace

TEST(FrameLabels, CanonicalRoundTrip) {
    for (Frame f : kAllFrames) {
        EXPECT_EQ(parse_frame(to_string(f)), f);
    }
}

TEST(FrameLabels, CommonSpellings) {
    EXPECT_EQ(parse_frame("NP _ that S"), Frame::NpThatS);
    EXPECT_EQ(parse_frame("np ___ that s"), Frame::NpThatS);
    EXPECT_EQ(parse_frame("NP be __ed that S"), Frame::NpBeThatS);
    EXPECT_EQ(parse_frame("NP be _ed to VP[+ev]"), Frame::NpBeToVpEventive);
    EXPECT_EQ(parse_frame("NP  __  to VP[-ev]"), Frame::NpToVpStative);
    EXPECT_FALSE(parse_frame("NP __ NP").has_value());
}

TEST(FrameLabels, SubjectsAndTenses) {
    EXPECT_EQ(parse_subject("first"), Subject::First);
    EXPECT_EQ(parse_subject("3rd"), Subject::Third);
    EXPECT_EQ(parse_tense("PAST"), Tense::Past);
    EXPECT_EQ(parse_tense("present"), Tense::Present);
    EXPECT_FALSE(parse_tense("future").has_value());
}

TEST(Index, Bijective) {
    Index<std::string> index(std::vector<std::string>{"think", "know", "think", "say"});
    EXPECT_EQ(index.size(), 3U);
    for (std::size_t id = 0; id < index.size(); ++id) {
        EXPECT_EQ(index.id(index.key(id)), id);
    }
    EXPECT_THROW(index.id("want"), IndexError);
    EXPECT_THROW(index.key(3), IndexError);
}

TEST(LoadCsv, TwoRowsOneVerb) {
    auto table = parse(std::string(kHeader) +
                       "think,NP __ that S,first,past,p1,0.9,0.8\n"
                       "think,NP __ that S,third,present,p2,0.7,1\n");
    EXPECT_EQ(table.size(), 2U);
    EXPECT_EQ(table.verbs().size(), 1U);
    EXPECT_EQ(table.participants().size(), 2U);
    EXPECT_EQ(table.cells().size(), 2U);
}

TEST(LoadCsv, MissingColumnNamesIt) {
    try {
        parse("verb,frame,subject,tense,negraising,acceptability\n"
              "think,NP __ that S,first,past,0.9,0.8\n");
        FAIL() << "expected a schema error";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("participant"), std::string::npos);
    }
}

TEST(LoadCsv, OutOfRangeResponseCarriesLineNumber) {
    const std::string text = std::string(kHeader) +
                             "think,NP __ that S,first,past,p1,0.9,0.8\n"
                             "know,NP __ that S,first,past,p1,1.5,0.8\n";
    try {
        parse(text);
        FAIL() << "expected a row error";
    } catch (const RowError& e) {
        EXPECT_EQ(e.line(), 3U);
    }
    LoadStats stats;
    std::ostringstream log;
    LoadOptions skip;
    skip.on_row_error = RowErrorPolicy::Skip;
    skip.log = &log;
    auto table = parse(text, skip, &stats);
    EXPECT_EQ(table.size(), 1U);
    EXPECT_EQ(stats.data_rows, 2U);
    EXPECT_EQ(stats.skipped_rows, 1U);
    EXPECT_NE(log.str().find("line 3"), std::string::npos);
}

TEST(LoadCsv, UnknownLabelsAreRowErrors) {
    EXPECT_THROW(parse(std::string(kHeader) + "think,NP __ NP,first,past,p1,0.9,0.8\n"),
                 RowError);
    EXPECT_THROW(parse(std::string(kHeader) + "think,NP __ that S,second,past,p1,0.9,0.8\n"),
                 RowError);
    EXPECT_THROW(parse(std::string(kHeader) + "think,NP __ that S,first,future,p1,0.9,0.8\n"),
                 RowError);
    EXPECT_THROW(parse(std::string(kHeader) + "think,NP __ that S,first,past,p1,abc,0.8\n"),
                 RowError);
}

TEST(LoadCsv, BomCrlfQuotesAndColumnOrder) {
    auto table = parse("\xEF\xBB\xBFparticipant,acceptability,negraising,tense,subject,frame,verb\r\n"
                       "p1,0.5,0.25,past,first,\"NP __ that S\",\"say, roughly\"\r\n");
    ASSERT_EQ(table.size(), 1U);
    const auto r = table.record(0);
    EXPECT_EQ(r.verb, "say, roughly");
    EXPECT_EQ(r.negraising, 0.25);
    EXPECT_EQ(r.acceptability, 0.5);
}

TEST(LoadCsv, SchemaOverride) {
    CsvSchema schema;
    schema.verb = "predicate";
    schema.participant = "worker";
    auto table = parse("predicate,frame,subject,tense,worker,negraising,acceptability\n"
                       "want,NP __ to VP[+ev],third,present,w9,0.4,0.6\n",
                       {}, nullptr, schema);
    EXPECT_EQ(table.verbs().key(0), "want");
    EXPECT_EQ(table.participants().key(0), "w9");
}

TEST(LoadCsv, EndpointsAreClamped) {
    auto table = parse(std::string(kHeader) + "think,NP __ that S,first,past,p1,0,1\n");
    EXPECT_EQ(table.ratings()[0].negraising, kResponseEpsilon);
    EXPECT_EQ(table.ratings()[0].acceptability, 1.0 - kResponseEpsilon);
}

TEST(LoadCsv, DropParticipants) {
    LoadOptions options;
    options.drop_participants = {"p2"};
    LoadStats stats;
    auto table = parse(std::string(kHeader) +
                           "think,NP __ that S,first,past,p1,0.9,0.8\n"
                           "think,NP __ that S,first,past,p2,0.9,0.8\n",
                       options, &stats);
    EXPECT_EQ(table.size(), 1U);
    EXPECT_EQ(stats.dropped_rows, 1U);
}

TEST(ResponseTable, RejectsBadRecords) {
    std::vector<ResponseRecord> bad = {{"think", Frame::NpThatS, Subject::First, Tense::Past,
                                        "p1", -0.1, 0.5}};
    EXPECT_THROW(ResponseTable::from_records(bad), DomainError);
    bad[0].negraising = 0.5;
    bad[0].participant = "";
    EXPECT_THROW(ResponseTable::from_records(bad), SchemaError);
}

TEST(ResponseTable, OrderIndependent) {
    std::mt19937_64 rng(1);
    auto table = nt::random_table(4, 3, 3, rng);
    auto records = table.records();
    std::shuffle(records.begin(), records.end(), rng);
    auto again = ResponseTable::from_records(records);
    EXPECT_EQ(again.records(), table.records());
    EXPECT_TRUE(std::equal(again.cells().begin(), again.cells().end(), table.cells().begin(),
                           table.cells().end()));
}

TEST(ResponseTable, IdentifiersResolve) {
    std::mt19937_64 rng(2);
    auto table = nt::random_table(5, 2, 4, rng);
    for (const auto& r : table.ratings()) {
        EXPECT_LT(r.verb, table.verbs().size());
        EXPECT_LT(r.participant, table.participants().size());
        EXPECT_LT(r.cell, table.cells().size());
        const auto& key = table.cells()[r.cell];
        EXPECT_EQ(key.verb, r.verb);
        EXPECT_EQ(key.frame, r.frame);
        EXPECT_EQ(table.find_cell(key), r.cell);
    }
}

TEST(ResponseTable, SubsetKeepsIndexes) {
    std::mt19937_64 rng(3);
    auto table = nt::random_table(4, 2, 3, rng);
    const std::vector<std::size_t> cells = {0, 2};
    auto sub = table.subset(cells);
    EXPECT_EQ(sub.verbs(), table.verbs());
    EXPECT_EQ(sub.participants(), table.participants());
    EXPECT_EQ(sub.cells().size(), 2U);
    EXPECT_EQ(sub.cells()[1], table.cells()[2]);
    EXPECT_EQ(sub.size(), table.ratings_by_cell()[0].size() + table.ratings_by_cell()[2].size());
}

TEST(WriteCsv, RoundTrip) {
    std::mt19937_64 rng(4);
    auto table = nt::random_table(6, 6, 5, rng, 3);
    std::ostringstream out;
    write_csv(table, out);
    auto again = parse(out.str());
    EXPECT_EQ(again.records(), table.records());
}

TEST(Summarize, SingleRecord) {
    auto table = parse(std::string(kHeader) + "think,NP __ that S,first,past,p1,0.9,0.8\n");
    auto s = summarize(table);
    EXPECT_EQ(s.n_records, 1U);
    ASSERT_EQ(s.verbs_per_tense_frame.size(), 1U);
    EXPECT_EQ((s.verbs_per_tense_frame.at({Tense::Past, Frame::NpThatS})), 1U);
    EXPECT_EQ(s.records_per_participant.at("p1"), 1U);
}

TEST(Summarize, CountsDistinctVerbs) {
    auto table = parse(std::string(kHeader) +
                       "think,NP __ that S,first,past,p1,0.9,0.8\n"
                       "think,NP __ that S,third,past,p2,0.9,0.8\n"
                       "know,NP __ that S,first,past,p1,0.1,0.9\n"
                       "know,NP __ that S,first,present,p1,0.1,0.9\n");
    auto s = summarize(table);
    EXPECT_EQ((s.verbs_per_tense_frame.at({Tense::Past, Frame::NpThatS})), 2U);
    EXPECT_EQ((s.verbs_per_tense_frame.at({Tense::Present, Frame::NpThatS})), 1U);
    EXPECT_EQ(s.records_per_participant.at("p1"), 3U);
    EXPECT_EQ(s.n_cells, 4U);
}

TEST(FormatDouble, ShortestRoundTrip) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = unit(rng);
        EXPECT_EQ(std::stod(format_double(x)), x);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
}
