#pragma once

#include "mdbench/chess.hpp"
#include "mdbench/pgn.hpp"

#include <cstdint>
#include <vector>

namespace mdbench::testing {

/// A legal game made of uniformly random moves. Ends at a terminal state
/// (result token set accordingly) or after `max_plies` with result "*".
corpus::PgnGame random_game(std::uint64_t seed, int max_plies = 200);

/// Every position visited by `random_game(seed, max_plies)`, including the start.
std::vector<chess::Position> random_playout_positions(std::uint64_t seed, int max_plies = 200);

/// Plays SAN tokens from the initial position.
chess::Position play(std::initializer_list<const char*> san);

}  // namespace mdbench::testing
