#pragma once

#include "dogm/types.hpp"

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dogm {

/// One scan: the platform pose followed by that scan's detections.
struct Scan {
    EgoPose pose;
    std::vector<Detection> detections;
};

class LogParseError : public std::runtime_error {
public:
    LogParseError(const std::string& message, int line)
        : std::runtime_error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Plain-text scan log, one record per line:
///   pose <t> <x> <y> <heading> <vx> <vy>
///   det  <t> <sensor_id> <range> <azimuth> <range_rate> <sigma_r> <sigma_phi> <sigma_rr>
/// A pose line opens a scan; its detections follow. '#' starts a comment.
/// Doubles are printed with 17 significant digits, so the round trip is exact.
void write_scan_log(std::ostream& out, std::span<const Scan> scans);
void write_scan_log(const std::string& path, std::span<const Scan> scans);

std::vector<Scan> read_scan_log(std::istream& in);
std::vector<Scan> read_scan_log_file(const std::string& path);

}  // namespace dogm
