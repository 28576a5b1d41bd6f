#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>

#include "dustmns/frame.hpp"

namespace dustmns {

struct LoadOptions {
    /// Drop population rows with any empty field (and edges touching them) instead of failing.
    bool drop_incomplete = false;
};

struct LoadedFrame {
    ArealFrame frame;
    std::size_t dropped_units = 0;
    std::size_t dropped_edges = 0;
};

/// Reads a population CSV (`unit_id,size,p,aux[,n_individuals]`) and an adjacency CSV
/// (`id_a,id_b`).
///
/// @throws IoError if a file cannot be opened.
/// @throws ParseError with the offending line for malformed rows.
/// @throws IntegrityError for duplicate ids, unknown edge endpoints or self-loops.
[[nodiscard]] LoadedFrame load_frame(const std::filesystem::path& population_file,
                                     const std::filesystem::path& adjacency_file,
                                     const LoadOptions& options = {});

/// Stream variants; `source` names the stream in error messages.
[[nodiscard]] LoadedFrame read_frame(std::istream& population, std::istream& adjacency,
                                     const LoadOptions& options = {},
                                     const std::string& population_source = "population",
                                     const std::string& adjacency_source = "adjacency");

void write_population_csv(const ArealFrame& frame, std::ostream& out);
void write_adjacency_csv(const ArealFrame& frame, std::ostream& out);

}  // namespace dustmns
