#ifndef RISKTREE_IO_HPP_
#define RISKTREE_IO_HPP_

#include <iosfwd>
#include <string>

#include "risktree/dynamic.hpp"
#include "risktree/report.hpp"
#include "risktree/static.hpp"

namespace risktree {

/// Shortest round-tripping decimal form; "+inf" for infinity.
std::string format_number(double v);

/// Accepts decimal reals and the tokens inf / +inf.
double parse_number(const std::string& token);

/// Comma- or whitespace-separated reals.
Vector parse_vector(const std::string& text);
Vector load_vector(const std::string& path);

FilteredSpace read_tree(std::istream& in, const std::string& source = "<input>");
void write_tree(std::ostream& out, const FilteredSpace& space);

DualModel read_model(std::istream& in, const std::string& source = "<input>");
DualModel load_model(const std::string& path);
void write_model(std::ostream& out, const DualModel& model);
std::string model_to_string(const DualModel& model);

StaticRiskMeasure read_dictionary(std::istream& in, const std::string& source = "<input>");
StaticRiskMeasure load_dictionary(const std::string& path);
void write_dictionary(std::ostream& out, const StaticRiskMeasure& rm);

/// First non-comment token of a file: risktree-tree, risktree-model or
/// risktree-dictionary.
std::string file_kind(const std::string& path);

inline constexpr const char* kReportSchema = "risktree-report/1";

void write_report_csv(std::ostream& out, const ConsistencyReport& report);
void write_report_json(std::ostream& out, const ConsistencyReport& report);
void write_report_table(std::ostream& out, const ConsistencyReport& report);

}  // namespace risktree

#endif  // RISKTREE_IO_HPP_
