#ifndef PHSMM_IO_HPP
#define PHSMM_IO_HPP

#include <cerrno>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phsmm/dataset.hpp"

namespace phsmm {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

}  // namespace detail

// CSV with a header row; one row per time step; missing marker "NA".
inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file: " + path);
    Dataset data;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, expected a header row");
    ++lineno;
    data.channel_names = detail::split(line, ',');
    if (data.channel_names.empty() || data.channel_names.front().empty())
        throw DataError(path + ":1: malformed header");
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, ',');
        if (fields.size() != data.channel_names.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(data.channel_names.size()) + " fields, got " +
                            std::to_string(fields.size()));
        ObservationRecord rec(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (fields[c] == "NA" || fields[c].empty()) continue;
            try {
                std::size_t used = 0;
                rec[c] = std::stod(fields[c], &used);
                if (used != fields[c].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) + ": unparseable value '" +
                                fields[c] + "' in column " + data.channel_names[c]);
            }
        }
        data.records.push_back(std::move(rec));
    }
    if (data.records.empty()) throw DataError(path + ": no data rows");
    return data;
}

// Writes to a temp file in the same directory, then renames into place.
inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open output file: " + tmp);
        out << content;
        if (!out) throw DataError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("rename failed: " + path + " (" + ec.message() + ")");
}

inline std::string dataset_to_csv(const Dataset& data) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t c = 0; c < data.channel_names.size(); ++c)
        out << (c ? "," : "") << data.channel_names[c];
    out << "\n";
    for (const auto& rec : data.records) {
        for (std::size_t c = 0; c < rec.size(); ++c) {
            if (c) out << ",";
            if (rec[c]) out << *rec[c];
            else out << "NA";
        }
        out << "\n";
    }
    return out.str();
}

// Flat key = value configuration file; '#' starts a comment; arrays are
// comma separated.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str());
    }

    static KeyValueConfig from_string(const std::string& text) {
        KeyValueConfig cfg;
        std::stringstream ss(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = detail::trim(line.substr(eq + 1));
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? values_.at(key) : fallback;
    }

    double get_double(const std::string& key) const {
        const std::string v = get_string(key);
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
        }
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const {
        const std::string v = get_string(key);
        try {
            return std::stol(v);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
        }
    }

    long get_int(const std::string& key, long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& f : detail::split(get_string(key), ',')) {
            try {
                out.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw ConfigError("config key " + key + ": expected numbers, got '" + f + "'");
            }
        }
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key) const {
        return detail::split(get_string(key), ',');
    }

    const std::map<std::string, std::string>& all() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace phsmm

#endif
