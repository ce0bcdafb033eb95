#include "scfm/jsonout.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "scfm/errors.hpp"

namespace scfm {
namespace {

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out += c;
            }
        }
    }
    return out;
}

} // namespace

std::string canonical_metrics_json(const MetricMap& values) {
    std::string out = "{";
    bool first = true;
    for (const auto& [key, value] : values) {
        if (!first)
            out += ",";
        first = false;
        out += "\"" + escape(key) + "\":";
        if (std::holds_alternative<std::int64_t>(value)) {
            out += std::to_string(std::get<std::int64_t>(value));
        } else {
            const double v = std::get<double>(value);
            if (!std::isfinite(v))
                throw DomainError("emit_metrics: non-finite value for key \"" + key + "\"");
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out += buf;
        }
    }
    out += "}";
    return out;
}

void emit_metrics(const std::filesystem::path& path, const MetricMap& values) {
    const std::string body = canonical_metrics_json(values) + "\n";
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("emit_metrics: cannot open " + tmp.string());
        out.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!out)
            throw IoError("emit_metrics: write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("emit_metrics: rename failed: " + ec.message());
}

} // namespace scfm
