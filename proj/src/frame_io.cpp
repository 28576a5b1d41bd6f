#include "dustmns/frame_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

#include "dustmns/errors.hpp"

namespace dustmns {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

bool blank(std::string_view line) { return trim(line).empty(); }

double parse_real(std::string_view field, const std::string& source, std::size_t line,
                  const char* column) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError(source, line,
                         fmt::format("column '{}': '{}' is not a finite number", column, field));
    }
    return value;
}

class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++number_;
            if (number_ == 1 && line.starts_with("\xEF\xBB\xBF")) {
                line.erase(0, 3);
            }
            if (!blank(line)) {
                return true;
            }
        }
        return false;
    }

    [[nodiscard]] std::size_t number() const noexcept { return number_; }
    [[nodiscard]] const std::string& source() const noexcept { return source_; }

private:
    std::istream& in_;
    std::string source_;
    std::size_t number_ = 0;
};

}  // namespace

LoadedFrame read_frame(std::istream& population, std::istream& adjacency,
                       const LoadOptions& options, const std::string& population_source,
                       const std::string& adjacency_source) {
    LineReader pop(population, population_source);
    std::string line;
    if (!pop.next(line)) {
        throw ParseError(pop.source(), pop.number() + 1, "missing header");
    }
    const auto header = split_fields(line);
    const bool with_individuals = header.size() == 5 && header[4] == "n_individuals";
    if (header.size() < 4 || header[0] != "unit_id" || header[1] != "size" || header[2] != "p" ||
        header[3] != "aux" || (header.size() == 5 && !with_individuals) || header.size() > 5) {
        throw ParseError(pop.source(), pop.number(),
                         "header must be 'unit_id,size,p,aux' (optionally ',n_individuals')");
    }
    const std::size_t columns = header.size();

    std::vector<ArealUnit> units;
    std::unordered_map<std::string, std::size_t> first_line;
    std::unordered_set<std::string> dropped_ids;
    std::size_t dropped_units = 0;
    while (pop.next(line)) {
        const auto fields = split_fields(line);
        if (fields.size() != columns) {
            throw ParseError(pop.source(), pop.number(),
                             fmt::format("expected {} fields, found {}", columns, fields.size()));
        }
        if (fields[0].empty()) {
            throw ParseError(pop.source(), pop.number(), "empty unit_id");
        }
        std::string id(fields[0]);
        const bool incomplete = fields[1].empty() || fields[2].empty() || fields[3].empty() ||
                                (with_individuals && fields[4].empty());
        if (options.drop_incomplete && incomplete) {
            ++dropped_units;
            dropped_ids.insert(id);
            continue;
        }
        if (fields[1].empty()) {
            throw ParseError(pop.source(), pop.number(), "missing size");
        }
        ArealUnit unit;
        unit.size_measure = parse_real(fields[1], pop.source(), pop.number(), "size");
        if (!(unit.size_measure > 0.0)) {
            throw ParseError(pop.source(), pop.number(), "size must be positive");
        }
        if (!fields[2].empty()) {
            unit.p_true = parse_real(fields[2], pop.source(), pop.number(), "p");
            if (*unit.p_true < 0.0 || *unit.p_true > 1.0) {
                throw ParseError(pop.source(), pop.number(), "p must lie in [0, 1]");
            }
        }
        if (!fields[3].empty()) {
            unit.aux = parse_real(fields[3], pop.source(), pop.number(), "aux");
        }
        if (with_individuals && !fields[4].empty()) {
            const double count = parse_real(fields[4], pop.source(), pop.number(), "n_individuals");
            if (count < 1.0 || count != std::floor(count)) {
                throw ParseError(pop.source(), pop.number(),
                                 "n_individuals must be a positive integer");
            }
            unit.n_individuals = static_cast<std::int64_t>(count);
        } else {
            unit.n_individuals = std::max<std::int64_t>(1, std::llround(unit.size_measure));
        }
        const auto [it, inserted] = first_line.emplace(id, pop.number());
        if (!inserted) {
            throw IntegrityError(fmt::format("{}:{}: duplicate unit id '{}' (first seen on line {})",
                                             pop.source(), pop.number(), id, it->second));
        }
        unit.id = std::move(id);
        units.push_back(std::move(unit));
    }

    LineReader adj(adjacency, adjacency_source);
    if (!adj.next(line)) {
        throw ParseError(adj.source(), adj.number() + 1, "missing header");
    }
    const auto adj_header = split_fields(line);
    if (adj_header.size() != 2 || adj_header[0] != "id_a" || adj_header[1] != "id_b") {
        throw ParseError(adj.source(), adj.number(), "header must be 'id_a,id_b'");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < units.size(); ++i) {
        index.emplace(units[i].id, i);
    }
    std::vector<ArealFrame::Edge> edges;
    std::size_t dropped_edges = 0;
    while (adj.next(line)) {
        const auto fields = split_fields(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw ParseError(adj.source(), adj.number(), "expected two non-empty ids");
        }
        const std::string a(fields[0]);
        const std::string b(fields[1]);
        if (a == b) {
            throw IntegrityError(
                fmt::format("{}:{}: self-loop on unit '{}'", adj.source(), adj.number(), a));
        }
        const auto ia = index.find(a);
        const auto ib = index.find(b);
        if (ia == index.end() || ib == index.end()) {
            if (dropped_ids.contains(a) || dropped_ids.contains(b)) {
                ++dropped_edges;
                continue;
            }
            throw IntegrityError(fmt::format("{}:{}: edge references unknown unit id '{}'",
                                             adj.source(), adj.number(),
                                             ia == index.end() ? a : b));
        }
        edges.emplace_back(ia->second, ib->second);
    }
    return {ArealFrame(std::move(units), edges), dropped_units, dropped_edges};
}

LoadedFrame load_frame(const std::filesystem::path& population_file,
                       const std::filesystem::path& adjacency_file, const LoadOptions& options) {
    std::ifstream pop(population_file);
    if (!pop) {
        throw IoError("cannot open population file " + population_file.string());
    }
    std::ifstream adj(adjacency_file);
    if (!adj) {
        throw IoError("cannot open adjacency file " + adjacency_file.string());
    }
    return read_frame(pop, adj, options, population_file.string(), adjacency_file.string());
}

void write_population_csv(const ArealFrame& frame, std::ostream& out) {
    out << "unit_id,size,p,aux,n_individuals\n";
    for (const auto& u : frame.units()) {
        out << u.id << ',' << fmt::format("{}", u.size_measure) << ','
            << (u.p_true ? fmt::format("{}", *u.p_true) : std::string()) << ','
            << (u.aux ? fmt::format("{}", *u.aux) : std::string()) << ',' << u.n_individuals
            << '\n';
    }
}

void write_adjacency_csv(const ArealFrame& frame, std::ostream& out) {
    out << "id_a,id_b\n";
    for (std::size_t i = 0; i < frame.size(); ++i) {
        for (const auto j : frame.neighbors(i)) {
            if (i < j) {
                out << frame.unit(i).id << ',' << frame.unit(j).id << '\n';
            }
        }
    }
}

}  // namespace dustmns
