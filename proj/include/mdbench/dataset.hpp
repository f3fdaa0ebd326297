#pragma once

#include "mdbench/corpus.hpp"

#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdbench::corpus {

class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::string& what, std::size_t line = 0) : std::runtime_error(what), line_(line) {}
    /// 1-based line of a malformed record, 0 for I/O failures.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// One JSON object per line: {"task":..., "input":..., "target":...}.
std::string to_jsonl_line(const TaskSample& sample);
TaskSample from_jsonl_line(const std::string& line, std::size_t line_no = 0);

void write_dataset(std::ostream& out, const std::vector<TaskSample>& samples);
void write_dataset(const std::filesystem::path& path, const std::vector<TaskSample>& samples);
std::vector<TaskSample> read_dataset(std::istream& in);
std::vector<TaskSample> read_dataset(const std::filesystem::path& path);

}  // namespace mdbench::corpus
