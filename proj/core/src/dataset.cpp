#include "negfactor/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>
#include <unordered_set>

namespace negfactor {

namespace {

std::string normalize_label(std::string_view label) {
    // lower-case, gap runs to "__", drop "_ed"/"ed" suffix on the gap,
    // collapse whitespace
    std::string s;
    s.reserve(label.size());
    for (char c : label) {
        s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] == '_') {
            std::size_t j = i;
            while (j < s.size() && s[j] == '_') {
                ++j;
            }
            const bool ed_suffix = j < s.size() && s.compare(j, 2, "ed") == 0 &&
                                   (j + 2 == s.size() || s[j + 2] == ' ');
            const bool standalone =
                (i == 0 || s[i - 1] == ' ') && (j == s.size() || s[j] == ' ');
            const bool gap = (j - i) >= 2 || ed_suffix || standalone;
            if (gap) {
                out += " __ ";
                if (ed_suffix) {
                    j += 2;
                }
            } else {
                out += ' ';
            }
            i = j;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    std::string collapsed;
    bool space = true;
    for (char c : out) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!space) {
                collapsed.push_back(' ');
            }
            space = true;
        } else {
            collapsed.push_back(c);
            space = false;
        }
    }
    while (!collapsed.empty() && collapsed.back() == ' ') {
        collapsed.pop_back();
    }
    return collapsed;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

double clamp_response(double x) {
    return std::clamp(x, kResponseEpsilon, 1.0 - kResponseEpsilon);
}

} // namespace

std::string_view to_string(Frame frame) {
    switch (frame) {
    case Frame::NpThatS:
        return "NP __ that S";
    case Frame::NpToVpEventive:
        return "NP __ to VP[+ev]";
    case Frame::NpToVpStative:
        return "NP __ to VP[-ev]";
    case Frame::NpBeThatS:
        return "NP be __ that S";
    case Frame::NpBeToVpEventive:
        return "NP be __ to VP[+ev]";
    case Frame::NpBeToVpStative:
        return "NP be __ to VP[-ev]";
    }
    return "?";
}

std::string_view to_string(Subject subject) {
    return subject == Subject::First ? "first" : "third";
}

std::string_view to_string(Tense tense) { return tense == Tense::Past ? "past" : "present"; }

std::optional<Frame> parse_frame(std::string_view label) {
    const std::string norm = normalize_label(trim(label));
    for (Frame f : kAllFrames) {
        if (normalize_label(to_string(f)) == norm) {
            return f;
        }
    }
    return std::nullopt;
}

std::optional<Subject> parse_subject(std::string_view label) {
    const std::string norm = normalize_label(trim(label));
    if (norm == "first" || norm == "1st" || norm == "1") {
        return Subject::First;
    }
    if (norm == "third" || norm == "3rd" || norm == "3") {
        return Subject::Third;
    }
    return std::nullopt;
}

std::optional<Tense> parse_tense(std::string_view label) {
    const std::string norm = normalize_label(trim(label));
    if (norm == "past") {
        return Tense::Past;
    }
    if (norm == "present") {
        return Tense::Present;
    }
    return std::nullopt;
}

ResponseTable ResponseTable::from_records(std::span<const ResponseRecord> records) {
    ResponseTable table;
    std::set<std::string> verbs, participants;
    std::set<Frame> frames;
    for (const auto& r : records) {
        if (r.verb.empty()) {
            throw SchemaError("empty verb identifier");
        }
        if (r.participant.empty()) {
            throw SchemaError("empty participant identifier");
        }
        for (double x : {r.negraising, r.acceptability}) {
            if (!(x >= 0.0 && x <= 1.0)) {
                throw DomainError("response " + format_double(x) + " outside [0, 1]");
            }
        }
        verbs.insert(r.verb);
        participants.insert(r.participant);
        frames.insert(r.frame);
    }
    table.verbs_ = Index<std::string>({verbs.begin(), verbs.end()});
    table.participants_ = Index<std::string>({participants.begin(), participants.end()});
    table.frames_ = Index<Frame>({frames.begin(), frames.end()});
    table.subjects_ = Index<Subject>({kAllSubjects.begin(), kAllSubjects.end()});
    table.tenses_ = Index<Tense>({kAllTenses.begin(), kAllTenses.end()});

    table.ratings_.reserve(records.size());
    for (const auto& r : records) {
        Rating rating;
        rating.verb = table.verbs_.id(r.verb);
        rating.frame = table.frames_.id(r.frame);
        rating.subject = table.subjects_.id(r.subject);
        rating.tense = table.tenses_.id(r.tense);
        rating.participant = table.participants_.id(r.participant);
        rating.negraising = clamp_response(r.negraising);
        rating.acceptability = clamp_response(r.acceptability);
        table.ratings_.push_back(rating);
    }
    table.build_cells();
    return table;
}

void ResponseTable::build_cells() {
    auto key = [](const Rating& r) {
        return std::tie(r.verb, r.frame, r.subject, r.tense, r.participant, r.negraising,
                        r.acceptability);
    };
    std::sort(ratings_.begin(), ratings_.end(),
              [&](const Rating& a, const Rating& b) { return key(a) < key(b); });
    cells_.clear();
    ratings_by_cell_.clear();
    for (std::size_t i = 0; i < ratings_.size(); ++i) {
        auto& r = ratings_[i];
        const CellKey k{r.verb, r.frame, r.subject, r.tense};
        if (cells_.empty() || cells_.back() != k) {
            cells_.push_back(k);
            ratings_by_cell_.emplace_back();
        }
        r.cell = cells_.size() - 1;
        ratings_by_cell_.back().push_back(i);
    }
}

ResponseTable ResponseTable::subset(std::span<const std::size_t> cell_ids) const {
    ResponseTable out;
    out.verbs_ = verbs_;
    out.frames_ = frames_;
    out.subjects_ = subjects_;
    out.tenses_ = tenses_;
    out.participants_ = participants_;
    std::vector<std::size_t> ids(cell_ids.begin(), cell_ids.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (std::size_t c : ids) {
        if (c >= cells_.size()) {
            throw IndexError("cell id " + std::to_string(c) + " out of range");
        }
        for (std::size_t i : ratings_by_cell_[c]) {
            out.ratings_.push_back(ratings_[i]);
        }
    }
    out.build_cells();
    return out;
}

std::optional<std::size_t> ResponseTable::find_cell(const CellKey& key) const {
    auto it = std::lower_bound(cells_.begin(), cells_.end(), key);
    if (it == cells_.end() || *it != key) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - cells_.begin());
}

ResponseRecord ResponseTable::record(std::size_t i) const {
    if (i >= ratings_.size()) {
        throw IndexError("record " + std::to_string(i) + " out of range");
    }
    const Rating& r = ratings_[i];
    return ResponseRecord{verbs_.key(r.verb),
                          frames_.key(r.frame),
                          subjects_.key(r.subject),
                          tenses_.key(r.tense),
                          participants_.key(r.participant),
                          r.negraising,
                          r.acceptability};
}

std::vector<ResponseRecord> ResponseTable::records() const {
    std::vector<ResponseRecord> out;
    out.reserve(ratings_.size());
    for (std::size_t i = 0; i < ratings_.size(); ++i) {
        out.push_back(record(i));
    }
    return out;
}

ResponseTable read_csv(std::istream& in, const CsvSchema& schema, const LoadOptions& options,
                       LoadStats* stats) {
    LoadStats local;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw SchemaError("input is empty; expected a header row");
    }
    ++line_no;
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const auto header = split_csv_line(line);
    std::vector<std::string> missing;
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) {
                return i;
            }
        }
        missing.push_back("'" + name + "'");
        return std::size_t{0};
    };
    const std::size_t c_verb = column(schema.verb);
    const std::size_t c_frame = column(schema.frame);
    const std::size_t c_subject = column(schema.subject);
    const std::size_t c_tense = column(schema.tense);
    const std::size_t c_participant = column(schema.participant);
    const std::size_t c_neg = column(schema.negraising);
    const std::size_t c_acc = column(schema.acceptability);
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) {
            names += (names.empty() ? "" : ", ") + m;
        }
        throw SchemaError((missing.size() == 1 ? "missing column " : "missing columns ") + names);
    }
    const std::size_t needed =
        std::max({c_verb, c_frame, c_subject, c_tense, c_participant, c_neg, c_acc}) + 1;

    const std::unordered_set<std::string> dropped(options.drop_participants.begin(),
                                                  options.drop_participants.end());
    std::vector<ResponseRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        ++local.data_rows;
        try {
            const auto fields = split_csv_line(line);
            if (fields.size() < needed) {
                throw RowError(line_no, "expected at least " + std::to_string(needed) +
                                            " fields, found " + std::to_string(fields.size()));
            }
            ResponseRecord rec;
            rec.verb = std::string(trim(fields[c_verb]));
            rec.participant = std::string(trim(fields[c_participant]));
            if (rec.verb.empty() || rec.participant.empty()) {
                throw RowError(line_no, "empty verb or participant");
            }
            if (dropped.contains(rec.participant)) {
                ++local.dropped_rows;
                continue;
            }
            auto frame = parse_frame(fields[c_frame]);
            if (!frame) {
                throw RowError(line_no, "unknown frame '" + fields[c_frame] + "'");
            }
            auto subject = parse_subject(fields[c_subject]);
            if (!subject) {
                throw RowError(line_no, "unknown subject '" + fields[c_subject] + "'");
            }
            auto tense = parse_tense(fields[c_tense]);
            if (!tense) {
                throw RowError(line_no, "unknown tense '" + fields[c_tense] + "'");
            }
            rec.frame = *frame;
            rec.subject = *subject;
            rec.tense = *tense;
            for (auto [col, name, dst] :
                 {std::tuple{c_neg, &schema.negraising, &rec.negraising},
                  std::tuple{c_acc, &schema.acceptability, &rec.acceptability}}) {
                auto value = parse_real(fields[col]);
                if (!value) {
                    throw RowError(line_no, *name + " '" + fields[col] + "' is not a real number");
                }
                if (!(*value >= 0.0 && *value <= 1.0)) {
                    throw RowError(line_no, *name + " " + fields[col] + " outside [0, 1]");
                }
                *dst = *value;
            }
            records.push_back(std::move(rec));
        } catch (const RowError& e) {
            if (options.on_row_error == RowErrorPolicy::FailFast) {
                throw;
            }
            ++local.skipped_rows;
            if (options.log != nullptr) {
                *options.log << "skipping " << e.what() << '\n';
            }
        }
    }
    if (stats != nullptr) {
        *stats = local;
    }
    return ResponseTable::from_records(records);
}

ResponseTable load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                       const LoadOptions& options, LoadStats* stats) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return read_csv(in, schema, options, stats);
}

void write_csv(const ResponseTable& table, std::ostream& out) {
    out << "verb,frame,subject,tense,participant,negraising,acceptability\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto r = table.record(i);
        out << csv_field(r.verb) << ',' << csv_field(to_string(r.frame)) << ','
            << to_string(r.subject) << ',' << to_string(r.tense) << ','
            << csv_field(r.participant) << ',' << format_double(r.negraising) << ','
            << format_double(r.acceptability) << '\n';
    }
}

void write_csv(const ResponseTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_csv(table, out);
}

std::vector<SentenceLabel> sentence_labels(const ResponseTable& table) {
    std::vector<SentenceLabel> out;
    out.reserve(table.cells().size());
    for (const auto& key : table.cells()) {
        out.push_back({table.verbs().key(key.verb), table.frames().key(key.frame),
                       table.subjects().key(key.subject), table.tenses().key(key.tense)});
    }
    return out;
}

SummaryReport summarize(const ResponseTable& table) {
    SummaryReport s;
    s.n_records = table.size();
    s.n_verbs = table.verbs().size();
    s.n_participants = table.participants().size();
    s.n_cells = table.cells().size();
    std::set<std::tuple<Tense, Frame, std::size_t>> seen;
    for (const auto& r : table.ratings()) {
        seen.emplace(table.tenses().key(r.tense), table.frames().key(r.frame), r.verb);
        ++s.records_per_participant[table.participants().key(r.participant)];
    }
    for (const auto& [tense, frame, verb] : seen) {
        ++s.verbs_per_tense_frame[{tense, frame}];
    }
    return s;
}

void write_summary(const SummaryReport& s, std::ostream& out) {
    out << "records: " << s.n_records << '\n'
        << "verbs: " << s.n_verbs << '\n'
        << "participants: " << s.n_participants << '\n'
        << "sentences: " << s.n_cells << '\n'
        << "verbs per tense/frame:\n";
    for (const auto& [key, count] : s.verbs_per_tense_frame) {
        out << "  " << to_string(key.first) << '\t' << to_string(key.second) << '\t' << count
            << '\n';
    }
    out << "records per participant:\n";
    for (const auto& [participant, count] : s.records_per_participant) {
        out << "  " << participant << '\t' << count << '\n';
    }
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw Error("cannot format double");
    }
    return std::string(buf, ptr);
}

} // namespace negfactor
