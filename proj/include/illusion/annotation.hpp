#pragma once

#include "illusion/questions.hpp"
#include "illusion/validation.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace illusion::annotation {

/// Milliseconds since some fixed epoch; injectable so tests can drive breaks.
using Clock = std::function<std::int64_t()>;
Clock system_clock();

struct SurveyItem {
	questions::QuestionRecord question;
	std::string image_id;
	std::filesystem::path unlabeled; ///< absolute or relative to the working directory
	std::filesystem::path labeled;
};

struct SurveyOptions {
	std::size_t items_per_participant{400};
	int slots_per_image{5};
	int break_every{50};
	std::int64_t break_ms{30000}; ///< minimum pause after every break_every answers
	std::uint64_t seed{0};
};

struct Session {
	std::string session_id;
	std::string participant_id;
	std::vector<std::string> assigned; ///< question ids in presentation order
	std::size_t cursor{0};
	std::int64_t last_vote_ms{0};

	[[nodiscard]] std::size_t answered() const noexcept { return cursor; }
	[[nodiscard]] bool done() const noexcept { return cursor >= assigned.size(); }
};

/// Thrown for a submission that is not the current item.
class Conflict : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// A submission arrived while the participant should be pausing.
class OnBreak : public std::runtime_error {
public:
	OnBreak(const std::string& what, std::int64_t retry_after_ms)
	    : std::runtime_error(what), retry_after_ms(retry_after_ms) {}
	std::int64_t retry_after_ms;
};

/// No image has a free slot for a new participant.
class NoCapacity : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

struct BreakActive {
	std::int64_t retry_after_ms{0};
};
struct Exhausted {};
struct Served {
	const SurveyItem* item{nullptr};
	std::size_t position{0}; ///< 0-based index within the assignment
	std::size_t total{0};
};
using NextResult = std::variant<Served, BreakActive, Exhausted>;

/// Survey state: sessions, slot reservations and votes. All public calls are serialized, so slot
/// allocation and vote writes are atomic. With a state dir, votes go to votes.jsonl, sessions to
/// sessions.json and serve/vote events to events.jsonl; reopening the same dir resumes.
class SurveyStore {
public:
	SurveyStore(std::vector<SurveyItem> items, SurveyOptions options, std::optional<std::filesystem::path> state_dir,
	            Clock clock = system_clock());

	/// Returns the existing session for a known participant, else assigns up to items_per_participant
	/// images, least-filled first. `created` reports which happened.
	Session open_session(const std::string& participant_id, bool* created = nullptr);

	NextResult next(const std::string& session_id);

	/// Records the answer to the current item. Comparison answers are option keys or letters;
	/// recognition answers are free text mapped to a color name.
	validation::VoteRecord submit(const std::string& session_id, const std::string& question_id,
	                              const std::string& answer);

	[[nodiscard]] Session session(const std::string& session_id) const;
	[[nodiscard]] std::vector<validation::VoteRecord> votes() const;
	[[nodiscard]] std::map<std::string, int> slot_counts() const;
	/// Images whose every slot has a vote.
	[[nodiscard]] std::vector<std::string> complete_images() const;
	[[nodiscard]] const SurveyItem* item_by_image(const std::string& image_id) const;
	[[nodiscard]] const SurveyOptions& options() const noexcept { return options_; }
	[[nodiscard]] std::int64_t now() const { return clock_(); }

private:
	void load();
	void saveSessions() const;
	void logEvent(const std::string& kind, const Session& s, const std::string& question_id, std::int64_t ts) const;

	std::vector<SurveyItem> items_;
	std::map<std::string, std::size_t> byQuestion_;
	std::map<std::string, std::size_t> byImage_;
	SurveyOptions options_;
	std::optional<std::filesystem::path> stateDir_;
	Clock clock_;

	mutable std::mutex mutex_;
	std::map<std::string, Session> sessions_;        ///< by session id
	std::map<std::string, std::string> byParticipant_; ///< participant -> session id
	std::map<std::string, int> slots_;                 ///< image id -> reserved slots
	std::vector<validation::VoteRecord> votes_;
	std::map<std::string, int> voteCounts_;
};

/// Pending manifest records (or all labeled ones with include_labeled) turned into survey items
/// through their sidecars. Paths resolve against the manifest's directory.
std::vector<SurveyItem> load_items(const std::filesystem::path& manifest_path, std::uint64_t seed,
                                   bool include_labeled = false);

/// Static guidance shown before the survey starts.
std::string onboarding_json();

class HttpServer {
public:
	explicit HttpServer(SurveyStore& store);
	~HttpServer();
	HttpServer(const HttpServer&) = delete;
	HttpServer& operator=(const HttpServer&) = delete;

	/// Binds and returns the port (0 picks a free one). Throws IoError when binding fails.
	int bind(const std::string& host, int port);
	/// Blocks until stop().
	void listen();
	void stop();

private:
	struct Impl;
	std::unique_ptr<Impl> impl_;
};

} // namespace illusion::annotation
