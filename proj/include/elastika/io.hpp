#pragma once

#include "elastika/curves.hpp"
#include "elastika/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace elastika {

enum class FileFormat { csv, jsonl };

inline FileFormat parse_file_format(std::string_view name) {
    if (name == "csv") return FileFormat::csv;
    if (name == "jsonl") return FileFormat::jsonl;
    throw ConfigError("unknown file format '" + std::string(name) + "' (expected csv or jsonl)");
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw Error("failed to format number");
    return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view text, std::string_view context) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError(std::string(context) + ": cannot parse number '" + std::string(text) + "'");
    return v;
}

inline long long parse_integer(std::string_view text, std::string_view context) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError(std::string(context) + ": cannot parse integer '" + std::string(text) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// Plain CSV tables (no quoting; fields never contain commas in our formats).

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw SchemaError("missing column '" + std::string(name) + "'");
    }
    bool has_column(std::string_view name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

/// Splits one CSV record; double-quoted fields may hold commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t i = 0;
    for (;;) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::string f;
        if (i < line.size() && line[i] == '"') {
            ++i;
            for (;;) {
                if (i >= line.size()) throw ParseError("unterminated quoted CSV field");
                if (line[i] == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        f += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                f += line[i++];
            }
            while (i < line.size() && line[i] != ',') ++i;
        } else {
            const std::size_t comma = std::min(line.find(',', i), line.size());
            std::string_view raw = line.substr(i, comma - i);
            while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t')) raw.remove_suffix(1);
            f = raw;
            i = comma;
        }
        fields.push_back(std::move(f));
        if (i >= line.size()) break;
        ++i;
    }
    return fields;
}

inline std::string quote_csv_field(const std::string& f) {
    if (f.find_first_of(",\"\n") == std::string::npos) return f;
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw SchemaError("'" + path.string() + "' is empty (header required)");
    return table;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << quote_csv_field(fields[i]);
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

// ---------------------------------------------------------------------------
// Long-format trial files: subject_id,trial_id,channel,index,time,value

inline constexpr std::array<std::string_view, 6> kLongColumns{"subject_id", "trial_id", "channel",
                                                              "index",      "time",     "value"};

namespace detail {

struct LongRecord {
    std::string subject_id;
    std::string trial_id;
    std::vector<std::string> channels;
    std::vector<std::map<long long, std::pair<double, double>>> samples;  // index -> (time, value)
};

inline std::vector<LongRecord> read_long_records(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    std::array<std::size_t, 6> col{};
    for (std::size_t i = 0; i < kLongColumns.size(); ++i) col[i] = table.column(kLongColumns[i]);

    std::vector<LongRecord> records;
    std::map<std::pair<std::string, std::string>, std::size_t> lookup;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string context = path.string() + ": row " + std::to_string(r + 2);
        const auto key = std::make_pair(row[col[0]], row[col[1]]);
        auto [it, inserted] = lookup.emplace(key, records.size());
        if (inserted) records.push_back(LongRecord{row[col[0]], row[col[1]], {}, {}});
        auto& rec = records[it->second];
        const std::string& channel = row[col[2]];
        std::size_t c = 0;
        while (c < rec.channels.size() && rec.channels[c] != channel) ++c;
        if (c == rec.channels.size()) {
            rec.channels.push_back(channel);
            rec.samples.emplace_back();
        }
        const long long index = parse_integer(row[col[3]], context);
        const double time = parse_double(row[col[4]], context);
        const double value = parse_double(row[col[5]], context);
        if (index < 0) throw ParseError(context + ": negative sample index");
        if (!rec.samples[c].emplace(index, std::make_pair(time, value)).second)
            throw ParseError(context + ": duplicate sample index " + std::to_string(index));
    }
    for (const auto& rec : records) {
        for (std::size_t c = 0; c < rec.channels.size(); ++c) {
            const auto& s = rec.samples[c];
            if (s.size() != rec.samples.front().size())
                throw SchemaError("trial '" + rec.trial_id + "' has ragged channel lengths");
            if (!s.empty() && (s.begin()->first != 0 || s.rbegin()->first != static_cast<long long>(s.size()) - 1))
                throw SchemaError("trial '" + rec.trial_id + "' channel '" + rec.channels[c] +
                                  "' has non-contiguous sample indices");
        }
    }
    return records;
}

inline RawTrial to_raw_trial(const LongRecord& rec) {
    RawTrial t;
    t.subject_id = rec.subject_id;
    t.trial_id = rec.trial_id;
    t.channels = rec.channels;
    for (const auto& s : rec.samples) {
        std::vector<double> v;
        v.reserve(s.size());
        for (const auto& [idx, tv] : s) v.push_back(tv.second);
        t.samples.push_back(std::move(v));
    }
    const auto& s0 = rec.samples.front();
    if (s0.size() >= 2) {
        const double dt = s0.at(1).first - s0.at(0).first;
        t.sample_rate = dt > 0.0 ? 1.0 / dt : 0.0;
    }
    return t;
}

inline std::vector<RawTrial> read_jsonl_trials(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::vector<RawTrial> trials;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string context = path.string() + ":" + std::to_string(line_no);
        nlohmann::ordered_json obj;
        try {
            obj = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(context + ": " + e.what());
        }
        if (!obj.is_object()) throw ParseError(context + ": expected a JSON object");
        for (const char* key : {"subject_id", "trial_id", "channels"})
            if (!obj.contains(key)) throw SchemaError(context + ": missing key '" + key + "'");
        if (!obj["channels"].is_object()) throw SchemaError(context + ": 'channels' must be an object");
        RawTrial t;
        auto as_id = [&](const nlohmann::ordered_json& v) {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_number()) return v.dump();
            throw SchemaError(context + ": ids must be strings or numbers");
        };
        t.subject_id = as_id(obj["subject_id"]);
        t.trial_id = as_id(obj["trial_id"]);
        if (obj.contains("sample_rate") && obj["sample_rate"].is_number()) t.sample_rate = obj["sample_rate"].get<double>();
        for (const auto& [name, arr] : obj["channels"].items()) {
            if (!arr.is_array()) throw SchemaError(context + ": channel '" + name + "' must be an array");
            std::vector<double> v;
            v.reserve(arr.size());
            for (const auto& x : arr) {
                if (!x.is_number()) throw ParseError(context + ": non-numeric sample in channel '" + name + "'");
                v.push_back(x.get<double>());
            }
            t.channels.push_back(name);
            t.samples.push_back(std::move(v));
        }
        if (t.channels.empty()) throw SchemaError(context + ": no channels");
        for (const auto& s : t.samples)
            if (s.size() != t.samples.front().size())
                throw SchemaError(context + ": trial '" + t.trial_id + "' has ragged channel lengths");
        trials.push_back(std::move(t));
    }
    return trials;
}

} // namespace detail

/// Reads raw trials from either supported format and checks trial invariants.
inline std::vector<RawTrial> load_raw_trials(const std::filesystem::path& path, FileFormat format) {
    std::vector<RawTrial> trials;
    if (format == FileFormat::csv) {
        for (const auto& rec : detail::read_long_records(path)) trials.push_back(detail::to_raw_trial(rec));
    } else {
        trials = detail::read_jsonl_trials(path);
    }
    for (const auto& t : trials) validate_raw_trial(t);
    return trials;
}

/// Reads curves already on the normalized grid. In CSV, the time column must
/// equal the evenly spaced grid on [0,1].
inline Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
    std::vector<Curve> curves;
    if (format == FileFormat::csv) {
        for (const auto& rec : detail::read_long_records(path)) {
            const auto n = static_cast<Index>(rec.samples.front().size());
            if (n < 2) throw InvariantViolation("trial '" + rec.trial_id + "' needs at least two grid points");
            const Vector grid = detail::uniform_grid(n);
            Matrix values(static_cast<Index>(rec.channels.size()), n);
            for (std::size_t c = 0; c < rec.channels.size(); ++c) {
                for (const auto& [idx, tv] : rec.samples[c]) {
                    if (std::abs(tv.first - grid(idx)) > 1e-9)
                        throw InvariantViolation("trial '" + rec.trial_id + "': time column is not the evenly spaced [0,1] grid");
                    values(static_cast<Index>(c), idx) = tv.second;
                }
            }
            curves.emplace_back(rec.trial_id, rec.subject_id, rec.channels, std::move(values));
        }
    } else {
        for (const auto& t : detail::read_jsonl_trials(path)) {
            const auto n = static_cast<Index>(t.num_samples());
            if (n < 2) throw InvariantViolation("trial '" + t.trial_id + "' needs at least two grid points");
            Matrix values(static_cast<Index>(t.channels.size()), n);
            for (std::size_t c = 0; c < t.channels.size(); ++c)
                for (Index j = 0; j < n; ++j) values(static_cast<Index>(c), j) = t.samples[c][static_cast<std::size_t>(j)];
            curves.emplace_back(t.trial_id, t.subject_id, t.channels, std::move(values));
        }
    }
    std::set<std::string> names;
    for (const auto& c : curves) {
        names.clear();
        names.insert(c.channels().begin(), c.channels().end());
        if (names.size() != c.channels().size())
            throw InvariantViolation("trial '" + c.trial_id() + "' has duplicate channel names");
    }
    return Dataset(std::move(curves));
}

/// Long-format rows for a list of curves (time is the normalized grid).
inline CsvTable curves_to_table(const std::vector<Curve>& curves) {
    CsvTable table;
    table.header.assign(kLongColumns.begin(), kLongColumns.end());
    for (const auto& c : curves) {
        const Vector& grid = c.grid();
        for (Index ch = 0; ch < c.num_channels(); ++ch)
            for (Index j = 0; j < c.grid_length(); ++j)
                table.rows.push_back({c.subject_id(), c.trial_id(), c.channels()[static_cast<std::size_t>(ch)],
                                      std::to_string(j), format_double(grid(j)), format_double(c.values()(ch, j))});
    }
    return table;
}

inline void save_curves(const std::vector<Curve>& curves, const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::csv) {
        write_csv(path, curves_to_table(curves));
        return;
    }
    std::string text;
    for (const auto& c : curves) {
        nlohmann::ordered_json obj;
        obj["subject_id"] = c.subject_id();
        obj["trial_id"] = c.trial_id();
        nlohmann::ordered_json channels = nlohmann::ordered_json::object();
        for (Index ch = 0; ch < c.num_channels(); ++ch) {
            std::vector<double> v(c.values().row(ch).begin(), c.values().row(ch).end());
            channels[c.channels()[static_cast<std::size_t>(ch)]] = v;
        }
        obj["channels"] = std::move(channels);
        text += obj.dump();
        text += '\n';
    }
    write_text(path, text);
}

inline void save_dataset(const Dataset& dataset, const std::filesystem::path& path, FileFormat format) {
    save_curves(dataset.curves(), path, format);
}

/// Writes raw trials; time = index / sample_rate (or the index when the rate is unknown).
inline void save_raw_trials(const std::vector<RawTrial>& trials, const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::jsonl) {
        std::string text;
        for (const auto& t : trials) {
            nlohmann::ordered_json obj;
            obj["subject_id"] = t.subject_id;
            obj["trial_id"] = t.trial_id;
            obj["sample_rate"] = t.sample_rate;
            nlohmann::ordered_json channels = nlohmann::ordered_json::object();
            for (std::size_t c = 0; c < t.channels.size(); ++c) channels[t.channels[c]] = t.samples[c];
            obj["channels"] = std::move(channels);
            text += obj.dump();
            text += '\n';
        }
        write_text(path, text);
        return;
    }
    CsvTable table;
    table.header.assign(kLongColumns.begin(), kLongColumns.end());
    for (const auto& t : trials)
        for (std::size_t c = 0; c < t.channels.size(); ++c)
            for (std::size_t k = 0; k < t.samples[c].size(); ++k) {
                const double time = t.sample_rate > 0.0 ? static_cast<double>(k) / t.sample_rate : static_cast<double>(k);
                table.rows.push_back({t.subject_id, t.trial_id, t.channels[c], std::to_string(k), format_double(time),
                                      format_double(t.samples[c][k])});
            }
    write_csv(path, table);
}

} // namespace elastika
