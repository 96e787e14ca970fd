#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negfactor/error.hpp"

namespace negfactor {

// The six clause-embedding frames, in canonical order.
enum class Frame : std::uint8_t {
    NpThatS,
    NpToVpEventive,
    NpToVpStative,
    NpBeThatS,
    NpBeToVpEventive,
    NpBeToVpStative,
};

enum class Subject : std::uint8_t { First, Third };
enum class Tense : std::uint8_t { Past, Present };

inline constexpr std::array<Frame, 6> kAllFrames = {
    Frame::NpThatS,   Frame::NpToVpEventive,   Frame::NpToVpStative,
    Frame::NpBeThatS, Frame::NpBeToVpEventive, Frame::NpBeToVpStative,
};
inline constexpr std::array<Subject, 2> kAllSubjects = {Subject::First, Subject::Third};
inline constexpr std::array<Tense, 2> kAllTenses = {Tense::Past, Tense::Present};

inline constexpr std::size_t kNumSubjects = 2;
inline constexpr std::size_t kNumTenses = 2;

// Responses at exactly 0 or 1 are pulled inside by this much on ingest.
inline constexpr double kResponseEpsilon = 1e-4;

std::string_view to_string(Frame frame);
std::string_view to_string(Subject subject);
std::string_view to_string(Tense tense);

// Accepts the canonical labels ("NP __ that S", "NP be __ to VP[-ev]", ...)
// plus common spellings: any run of underscores for the gap, "_ed" after the
// gap, and any letter case.
std::optional<Frame> parse_frame(std::string_view label);
std::optional<Subject> parse_subject(std::string_view label);
std::optional<Tense> parse_tense(std::string_view label);

// Bijection between identifiers and dense ids 0..size()-1.
template <typename Key> class Index {
  public:
    Index() = default;
    explicit Index(std::vector<Key> keys) {
        for (auto& k : keys) {
            insert(k);
        }
    }

    std::size_t insert(const Key& key) {
        auto [it, added] = ids_.try_emplace(key, keys_.size());
        if (added) {
            keys_.push_back(key);
        }
        return it->second;
    }

    std::optional<std::size_t> find(const Key& key) const {
        auto it = ids_.find(key);
        if (it == ids_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    std::size_t id(const Key& key) const {
        auto found = find(key);
        if (!found) {
            throw IndexError("identifier not present in index");
        }
        return *found;
    }

    const Key& key(std::size_t id) const {
        if (id >= keys_.size()) {
            throw IndexError("dense id " + std::to_string(id) + " out of range");
        }
        return keys_[id];
    }

    std::size_t size() const noexcept { return keys_.size(); }
    std::span<const Key> keys() const noexcept { return keys_; }

    friend bool operator==(const Index& a, const Index& b) { return a.keys_ == b.keys_; }

  private:
    std::vector<Key> keys_;
    std::map<Key, std::size_t> ids_;
};

// One judgment as it appears in the input file.
struct ResponseRecord {
    std::string verb;
    Frame frame = Frame::NpThatS;
    Subject subject = Subject::First;
    Tense tense = Tense::Past;
    std::string participant;
    double negraising = 0.5;
    double acceptability = 0.5;

    friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

// A (verb, frame, subject, tense) sentence in dense ids.
struct CellKey {
    std::size_t verb = 0;
    std::size_t frame = 0;
    std::size_t subject = 0;
    std::size_t tense = 0;

    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

// One judgment in dense ids. `cell` indexes ResponseTable::cells().
struct Rating {
    std::size_t verb = 0;
    std::size_t frame = 0;
    std::size_t subject = 0;
    std::size_t tense = 0;
    std::size_t participant = 0;
    std::size_t cell = 0;
    double negraising = 0.5;
    double acceptability = 0.5;
};

// Immutable, fully indexed collection of judgments.
//
// Verb and participant ids follow lexicographic order of the identifiers,
// frame ids follow canonical frame order over the frames present, and subject
// and tense ids always cover both enum values. Ratings are stored sorted by
// (cell, participant, responses), so two tables built from the same records
// in any order are identical.
class ResponseTable {
  public:
    ResponseTable() = default;

    // Validates and clamps responses; throws DomainError for values outside
    // [0, 1] and SchemaError for empty identifiers.
    static ResponseTable from_records(std::span<const ResponseRecord> records);

    // Ratings in `cells` (ids into this table's cell list), keeping this
    // table's verb, frame and participant indexes.
    ResponseTable subset(std::span<const std::size_t> cell_ids) const;

    std::size_t size() const noexcept { return ratings_.size(); }
    bool empty() const noexcept { return ratings_.empty(); }

    std::span<const Rating> ratings() const noexcept { return ratings_; }
    std::span<const CellKey> cells() const noexcept { return cells_; }

    const Index<std::string>& verbs() const noexcept { return verbs_; }
    const Index<Frame>& frames() const noexcept { return frames_; }
    const Index<Subject>& subjects() const noexcept { return subjects_; }
    const Index<Tense>& tenses() const noexcept { return tenses_; }
    const Index<std::string>& participants() const noexcept { return participants_; }

    std::optional<std::size_t> find_cell(const CellKey& key) const;

    ResponseRecord record(std::size_t i) const;
    std::vector<ResponseRecord> records() const;

    // Ids of ratings belonging to each cell, in storage order.
    const std::vector<std::vector<std::size_t>>& ratings_by_cell() const noexcept {
        return ratings_by_cell_;
    }

  private:
    void build_cells();

    std::vector<Rating> ratings_;
    std::vector<CellKey> cells_;
    std::vector<std::vector<std::size_t>> ratings_by_cell_;
    Index<std::string> verbs_;
    Index<Frame> frames_;
    Index<Subject> subjects_;
    Index<Tense> tenses_;
    Index<std::string> participants_;
};

// A sentence by name rather than dense ids.
struct SentenceLabel {
    std::string verb;
    Frame frame = Frame::NpThatS;
    Subject subject = Subject::First;
    Tense tense = Tense::Past;

    friend bool operator==(const SentenceLabel&, const SentenceLabel&) = default;
};

// Labels of every cell of `table`, in cell order.
std::vector<SentenceLabel> sentence_labels(const ResponseTable& table);

// Maps each logical column to its header name in the file.
struct CsvSchema {
    std::string verb = "verb";
    std::string frame = "frame";
    std::string subject = "subject";
    std::string tense = "tense";
    std::string participant = "participant";
    std::string negraising = "negraising";
    std::string acceptability = "acceptability";
};

enum class RowErrorPolicy { FailFast, Skip };

struct LoadOptions {
    RowErrorPolicy on_row_error = RowErrorPolicy::FailFast;
    // Participants whose rows are dropped before indexing.
    std::vector<std::string> drop_participants;
    // Where skipped rows are reported under RowErrorPolicy::Skip.
    std::ostream* log = nullptr;
};

struct LoadStats {
    std::size_t data_rows = 0;
    std::size_t skipped_rows = 0;
    std::size_t dropped_rows = 0;
};

ResponseTable read_csv(std::istream& in, const CsvSchema& schema = {},
                       const LoadOptions& options = {}, LoadStats* stats = nullptr);
ResponseTable load_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                       const LoadOptions& options = {}, LoadStats* stats = nullptr);

// Writes the canonical header and shortest round-trip decimal responses.
void write_csv(const ResponseTable& table, std::ostream& out);
void write_csv(const ResponseTable& table, const std::filesystem::path& path);

struct SummaryReport {
    std::size_t n_records = 0;
    std::size_t n_verbs = 0;
    std::size_t n_participants = 0;
    std::size_t n_cells = 0;
    // Distinct verbs per (tense, frame).
    std::map<std::pair<Tense, Frame>, std::size_t> verbs_per_tense_frame;
    std::map<std::string, std::size_t> records_per_participant;
};

SummaryReport summarize(const ResponseTable& table);
void write_summary(const SummaryReport& summary, std::ostream& out);

// Shortest decimal that parses back to the same double.
std::string format_double(double value);

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view s);

} // namespace negfactor
