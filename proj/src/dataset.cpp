#include "mdbench/dataset.hpp"

#include <json.hpp>

#include <fstream>

namespace mdbench::corpus {

using nlohmann::ordered_json;

std::string to_jsonl_line(const TaskSample& sample) {
    ordered_json j;
    j["task"] = task_name(sample.task);
    j["input"] = sample.input;
    j["target"] = sample.target;
    return j.dump();
}

TaskSample from_jsonl_line(const std::string& line, std::size_t line_no) {
    try {
        const auto j = ordered_json::parse(line);
        const auto name = j.at("task").get<std::string>();
        const auto task = parse_task(name);
        if (!task) throw DatasetError("unknown task '" + name + "'", line_no);
        return TaskSample{*task, j.at("input").get<std::string>(), j.at("target").get<std::string>()};
    } catch (const DatasetError&) {
        throw;
    } catch (const std::exception& e) {
        throw DatasetError("malformed dataset line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
}

void write_dataset(std::ostream& out, const std::vector<TaskSample>& samples) {
    for (const auto& s : samples) out << to_jsonl_line(s) << '\n';
    if (!out) throw DatasetError("dataset write failed");
}

void write_dataset(const std::filesystem::path& path, const std::vector<TaskSample>& samples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open '" + path.string() + "' for writing");
    write_dataset(out, samples);
    out.flush();
    if (!out) throw DatasetError("write to '" + path.string() + "' failed");
}

std::vector<TaskSample> read_dataset(std::istream& in) {
    std::vector<TaskSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(from_jsonl_line(line, line_no));
    }
    if (in.bad()) throw DatasetError("dataset read failed");
    return out;
}

std::vector<TaskSample> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open '" + path.string() + "'");
    return read_dataset(in);
}

}  // namespace mdbench::corpus
