#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hetfuse/common.hpp"

namespace hetfuse {

// Flat dotted-key configuration: one `key = value` pair per line, `#` starts
// a comment. Keys must come from a registered schema; unknown keys are usage
// errors so that config drift fails loudly.
class ConfigMap {
public:
    struct KeyInfo {
        std::string doc;
        std::string default_value;
    };

    void declare(const std::string& key, const std::string& default_value,
                 const std::string& doc) {
        schema_[key] = {doc, default_value};
    }

    bool known(const std::string& key) const { return schema_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) {
        check(known(key), ErrorKind::Usage, "unknown config key '", key, "'");
        values_[key] = value;
    }

    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        check(in.good(), ErrorKind::Io, "cannot read config file: ", path.string());
        std::string line;
        int64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto eq = line.find('=');
            check(eq != std::string::npos, ErrorKind::Format, "config line ", lineno,
                  " is not 'key = value': ", line);
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    // Applies a `key=value` override (the CLI's --set).
    void apply_override(const std::string& kv) {
        const auto eq = kv.find('=');
        check(eq != std::string::npos, ErrorKind::Usage, "override must be key=value: ", kv);
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }

    std::string get_str(const std::string& key) const {
        check(known(key), ErrorKind::Usage, "unknown config key '", key, "'");
        const auto it = values_.find(key);
        return it != values_.end() ? it->second : schema_.at(key).default_value;
    }

    int64_t get_int(const std::string& key) const {
        const std::string s = get_str(key);
        try {
            size_t pos = 0;
            const int64_t v = std::stoll(s, &pos);
            check(pos == s.size(), ErrorKind::Format, "");
            return v;
        } catch (...) {
            fail(ErrorKind::Format, "config key '", key, "' expects an integer, got '", s, "'");
        }
    }

    double get_double(const std::string& key) const {
        const std::string s = get_str(key);
        try {
            size_t pos = 0;
            const double v = std::stod(s, &pos);
            check(pos == s.size(), ErrorKind::Format, "");
            return v;
        } catch (...) {
            fail(ErrorKind::Format, "config key '", key, "' expects a number, got '", s, "'");
        }
    }

    bool get_bool(const std::string& key) const {
        const std::string s = get_str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        fail(ErrorKind::Format, "config key '", key, "' expects a boolean, got '", s, "'");
    }

    // Comma-separated lists.
    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        std::stringstream ss(get_str(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : get_list(key)) {
            try {
                out.push_back(std::stod(s));
            } catch (...) {
                fail(ErrorKind::Format, "config key '", key, "' expects numbers, got '", s, "'");
            }
        }
        return out;
    }

    std::vector<int64_t> get_int_list(const std::string& key) const {
        std::vector<int64_t> out;
        for (double v : get_double_list(key)) out.push_back(static_cast<int64_t>(v));
        return out;
    }

    // Resolved-config echo: every declared key with its effective value.
    void write_resolved(const std::filesystem::path& path) const {
        std::ofstream out(path);
        check(out.good(), ErrorKind::Io, "cannot write resolved config: ", path.string());
        for (const auto& [key, info] : schema_) out << key << " = " << get_str(key) << "\n";
    }

    // Help table: every accepted key, its default and one-line doc.
    std::string help() const {
        std::ostringstream out;
        size_t width = 0;
        for (const auto& [key, info] : schema_) width = std::max(width, key.size());
        for (const auto& [key, info] : schema_) {
            out << "  " << key << std::string(width - key.size() + 2, ' ') << info.doc
                << " [default: " << (info.default_value.empty() ? "<empty>" : info.default_value)
                << "]\n";
        }
        return out.str();
    }

    const std::map<std::string, KeyInfo>& schema() const { return schema_; }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, KeyInfo> schema_;
    std::map<std::string, std::string> values_;
};

}  // namespace hetfuse
