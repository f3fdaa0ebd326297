#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mdbench::corpus {

struct PgnGame {
    std::vector<std::pair<std::string, std::string>> tags;
    std::vector<std::string> moves;  // SAN tokens, move numbers stripped
    std::string result;              // "1-0", "0-1", "1/2-1/2" or "*"

    std::optional<std::string> tag(std::string_view name) const;
};

struct PgnDiagnostic {
    std::size_t game_index;  // 0-based ordinal of the game in the stream
    std::size_t line;        // line where the game started
    std::string message;
};

struct PgnReaderOptions {
    // Replay every game through the rules engine and skip games that do not replay.
    bool validate = true;
};

/// Streaming PGN reader. Comments, variations, NAGs and move numbers are
/// stripped; malformed games are skipped and recorded as diagnostics.
class PgnReader {
public:
    explicit PgnReader(std::istream& in, PgnReaderOptions options = {});

    /// Next well-formed game, or nullopt at end of stream.
    std::optional<PgnGame> next();

    const std::vector<PgnDiagnostic>& diagnostics() const { return diagnostics_; }
    std::size_t games_read() const { return yielded_; }
    std::size_t games_skipped() const { return skipped_; }

private:
    bool read_line(std::string& line);
    void skip(std::size_t start_line, std::string message);

    std::istream& in_;
    PgnReaderOptions options_;
    std::optional<std::string> pending_;
    std::size_t line_no_ = 0;
    std::size_t game_index_ = 0;
    std::size_t yielded_ = 0;
    std::size_t skipped_ = 0;
    std::vector<PgnDiagnostic> diagnostics_;
};

/// Convenience: reads every game of a stream.
std::vector<PgnGame> parse_pgn_stream(std::istream& in, PgnReaderOptions options = {},
                                      std::vector<PgnDiagnostic>* diagnostics = nullptr);

/// Replays the SAN list from the game's start position (FEN tag honored).
/// Returns an error message for the first move that does not replay.
std::optional<std::string> replay_error(const PgnGame& game);

/// Keeps games where both WhiteElo and BlackElo parse as integers >= min_elo.
std::vector<PgnGame> filter_by_min_elo(std::vector<PgnGame> games, int min_elo);

bool is_result_token(std::string_view token);

/// Drops a leading move number: "12." and "12..." become empty, "1.e4" becomes "e4".
/// A bare integer also counts as a move number.
std::string_view strip_move_number(std::string_view token);

/// Renders a game back to PGN text (tags + wrapped movetext with move numbers).
std::string to_pgn(const PgnGame& game);

}  // namespace mdbench::corpus
