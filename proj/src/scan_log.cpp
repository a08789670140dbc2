#include "dogm/scan_log.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dogm {

namespace {

void append_double(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %.17g", v);
    line += buf;
}

double parse_double(const std::string& token, int line_no, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        throw LogParseError(std::string("invalid number for ") + what + ": '" + token + "'", line_no);
    return v;
}

int parse_int(const std::string& token, int line_no, const char* what) {
    char* end = nullptr;
    const long v = std::strtol(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0')
        throw LogParseError(std::string("invalid integer for ") + what + ": '" + token + "'", line_no);
    return static_cast<int>(v);
}

}  // namespace

void write_scan_log(std::ostream& out, std::span<const Scan> scans) {
    out << "# scan log v1\n";
    std::string line;
    for (const Scan& scan : scans) {
        line = "pose";
        append_double(line, scan.pose.timestamp);
        append_double(line, scan.pose.position.x());
        append_double(line, scan.pose.position.y());
        append_double(line, scan.pose.heading);
        append_double(line, scan.pose.velocity.x());
        append_double(line, scan.pose.velocity.y());
        out << line << '\n';
        for (const Detection& d : scan.detections) {
            line = "det";
            append_double(line, d.timestamp);
            line += ' ';
            line += std::to_string(d.sensor_id);
            append_double(line, d.range);
            append_double(line, d.azimuth);
            append_double(line, d.range_rate);
            append_double(line, d.sigma_range);
            append_double(line, d.sigma_azimuth);
            append_double(line, d.sigma_range_rate);
            out << line << '\n';
        }
    }
}

void write_scan_log(const std::string& path, std::span<const Scan> scans) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_scan_log: cannot open " + path);
    write_scan_log(out, scans);
}

std::vector<Scan> read_scan_log(std::istream& in) {
    std::vector<Scan> scans;
    std::string raw;
    int line_no = 0;
    double last_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ss(raw);
        std::string kind;
        if (!(ss >> kind)) continue;  // blank line

        std::vector<std::string> tokens;
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);

        if (kind == "pose") {
            if (tokens.size() != 6) throw LogParseError("pose expects 6 fields", line_no);
            Scan scan;
            scan.pose.timestamp = parse_double(tokens[0], line_no, "timestamp");
            scan.pose.position.x() = parse_double(tokens[1], line_no, "x");
            scan.pose.position.y() = parse_double(tokens[2], line_no, "y");
            scan.pose.heading = parse_double(tokens[3], line_no, "heading");
            scan.pose.velocity.x() = parse_double(tokens[4], line_no, "vx");
            scan.pose.velocity.y() = parse_double(tokens[5], line_no, "vy");
            if (scan.pose.timestamp < last_t)
                throw LogParseError("pose timestamps must be non-decreasing", line_no);
            last_t = scan.pose.timestamp;
            scans.push_back(std::move(scan));
        } else if (kind == "det") {
            if (tokens.size() != 8) throw LogParseError("det expects 8 fields", line_no);
            if (scans.empty()) throw LogParseError("det before any pose", line_no);
            Detection d;
            d.timestamp = parse_double(tokens[0], line_no, "timestamp");
            d.sensor_id = parse_int(tokens[1], line_no, "sensor_id");
            d.range = parse_double(tokens[2], line_no, "range");
            d.azimuth = parse_double(tokens[3], line_no, "azimuth");
            d.range_rate = parse_double(tokens[4], line_no, "range_rate");
            d.sigma_range = parse_double(tokens[5], line_no, "sigma_range");
            d.sigma_azimuth = parse_double(tokens[6], line_no, "sigma_azimuth");
            d.sigma_range_rate = parse_double(tokens[7], line_no, "sigma_range_rate");
            scans.back().detections.push_back(d);
        } else {
            throw LogParseError("unknown record '" + kind + "'", line_no);
        }
    }
    return scans;
}

std::vector<Scan> read_scan_log_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_scan_log: cannot open " + path);
    return read_scan_log(in);
}

}  // namespace dogm
