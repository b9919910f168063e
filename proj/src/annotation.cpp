#include "illusion/annotation.hpp"

#include "illusion/errors.hpp"
#include "illusion/eval.hpp"
#include "illusion/jsonl.hpp"
#include "illusion/manifest.hpp"
#include "illusion/pipeline.hpp"
#include "illusion/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>

namespace illusion::annotation {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string sessionIdFor(std::uint64_t seed, const std::string& participant) {
	char buf[24];
	std::snprintf(buf, sizeof buf, "s-%016llx",
	              static_cast<unsigned long long>(mix_seed(seed, stable_hash(participant))));
	return buf;
}

std::string canonicalAnswer(const questions::QuestionRecord& q, const std::string& raw) {
	if (q.kind == questions::QuestionKind::Recognition) {
		const auto color = eval::normalize_color_answer(raw);
		if (!color) {
			throw ValidationError("answer does not name a single color: " + raw);
		}
		return *color;
	}
	for (std::size_t i = 0; i < q.options.size(); ++i) {
		const auto& opt = q.options[i];
		if (raw == opt.key) {
			return opt.key;
		}
		if (raw.size() == 1 && std::toupper(static_cast<unsigned char>(raw[0])) == questions::option_letter(i)) {
			return opt.key;
		}
	}
	throw ValidationError("answer is not one of the options: " + raw);
}

} // namespace

Clock system_clock() {
	return [] {
		return std::chrono::duration_cast<std::chrono::milliseconds>(
		           std::chrono::system_clock::now().time_since_epoch())
		    .count();
	};
}

SurveyStore::SurveyStore(std::vector<SurveyItem> items, SurveyOptions options,
                         std::optional<std::filesystem::path> state_dir, Clock clock)
    : items_(std::move(items)), options_(options), stateDir_(std::move(state_dir)), clock_(std::move(clock)) {
	if (options_.slots_per_image < 1 || options_.break_every < 1 || options_.break_ms < 0 ||
	    options_.items_per_participant == 0) {
		throw ValidationError("survey options out of range");
	}
	for (std::size_t i = 0; i < items_.size(); ++i) {
		const auto& it = items_[i];
		if (!byQuestion_.emplace(it.question.id, i).second || !byImage_.emplace(it.image_id, i).second) {
			throw ValidationError("duplicate survey item: " + it.image_id);
		}
		slots_[it.image_id] = 0;
	}
	if (stateDir_) {
		std::filesystem::create_directories(*stateDir_);
		load();
	}
}

void SurveyStore::load() {
	const auto sessionsPath = *stateDir_ / "sessions.json";
	if (std::filesystem::exists(sessionsPath)) {
		json j;
		try {
			j = json::parse(jsonl::read_file(sessionsPath));
			for (const auto& s : j.at("sessions")) {
				Session session;
				session.session_id = s.at("session_id").get<std::string>();
				session.participant_id = s.at("participant_id").get<std::string>();
				session.assigned = s.at("assigned").get<std::vector<std::string>>();
				for (const auto& q : session.assigned) {
					const auto it = byQuestion_.find(q);
					if (it == byQuestion_.end()) {
						throw ValidationError(sessionsPath.string() + ": unknown question " + q);
					}
					++slots_[items_[it->second].image_id];
				}
				byParticipant_[session.participant_id] = session.session_id;
				sessions_[session.session_id] = std::move(session);
			}
		} catch (const json::exception& e) {
			throw ValidationError(sessionsPath.string() + ": " + e.what());
		}
	}
	const auto votesPath = *stateDir_ / "votes.jsonl";
	if (std::filesystem::exists(votesPath)) {
		// Votes are the source of truth for progress: each must be the next item of its session.
		for (auto& v : validation::read_votes(votesPath)) {
			const auto p = byParticipant_.find(v.participant_id);
			if (p == byParticipant_.end()) {
				throw ValidationError(votesPath.string() + ": vote from unknown participant " + v.participant_id);
			}
			Session& s = sessions_[p->second];
			if (s.done() || s.assigned[s.cursor] != v.question_id) {
				throw ValidationError(votesPath.string() + ": vote out of sequence for " + v.participant_id);
			}
			++s.cursor;
			s.last_vote_ms = v.timestamp_ms;
			++voteCounts_[v.image_id];
			votes_.push_back(std::move(v));
		}
	}
}

void SurveyStore::saveSessions() const {
	if (!stateDir_) {
		return;
	}
	ordered_json arr = ordered_json::array();
	for (const auto& [id, s] : sessions_) {
		arr.push_back(
		    ordered_json{{"session_id", s.session_id}, {"participant_id", s.participant_id}, {"assigned", s.assigned}});
	}
	jsonl::write_atomic(*stateDir_ / "sessions.json", ordered_json{{"sessions", arr}}.dump(1) + "\n");
}

void SurveyStore::logEvent(const std::string& kind, const Session& s, const std::string& question_id,
                           std::int64_t ts) const {
	if (!stateDir_) {
		return;
	}
	ordered_json j{{"ts", ts},
	               {"event", kind},
	               {"session_id", s.session_id},
	               {"participant_id", s.participant_id},
	               {"question_id", question_id},
	               {"answered", s.answered()}};
	jsonl::append_locked(*stateDir_ / "events.jsonl", {j.dump()});
}

Session SurveyStore::open_session(const std::string& participant_id, bool* created) {
	if (participant_id.empty()) {
		throw ValidationError("participant_id is required");
	}
	const std::lock_guard lock(mutex_);
	if (const auto it = byParticipant_.find(participant_id); it != byParticipant_.end()) {
		if (created) {
			*created = false;
		}
		return sessions_.at(it->second);
	}

	// Least-filled images first so every image approaches its slot count evenly.
	const std::uint64_t salt = mix_seed(options_.seed, stable_hash(participant_id));
	std::vector<std::size_t> open;
	for (std::size_t i = 0; i < items_.size(); ++i) {
		if (slots_[items_[i].image_id] < options_.slots_per_image) {
			open.push_back(i);
		}
	}
	if (open.empty()) {
		throw NoCapacity("every image already has " + std::to_string(options_.slots_per_image) + " participants");
	}
	std::sort(open.begin(), open.end(), [&](std::size_t a, std::size_t b) {
		const int sa = slots_[items_[a].image_id];
		const int sb = slots_[items_[b].image_id];
		if (sa != sb) {
			return sa < sb;
		}
		const auto ha = mix_seed(salt, stable_hash(items_[a].image_id));
		const auto hb = mix_seed(salt, stable_hash(items_[b].image_id));
		return ha != hb ? ha < hb : a < b;
	});
	open.resize(std::min(open.size(), options_.items_per_participant));

	Rng rng(salt);
	for (std::size_t i = open.size(); i > 1; --i) {
		std::swap(open[i - 1], open[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
	}

	Session s;
	s.session_id = sessionIdFor(options_.seed, participant_id);
	s.participant_id = participant_id;
	for (const auto i : open) {
		s.assigned.push_back(items_[i].question.id);
		++slots_[items_[i].image_id];
	}
	byParticipant_[participant_id] = s.session_id;
	sessions_[s.session_id] = s;
	saveSessions();
	if (created) {
		*created = true;
	}
	return s;
}

NextResult SurveyStore::next(const std::string& session_id) {
	const std::lock_guard lock(mutex_);
	const auto it = sessions_.find(session_id);
	if (it == sessions_.end()) {
		throw NotFound("unknown session " + session_id);
	}
	const Session& s = it->second;
	if (s.done()) {
		return Exhausted{};
	}
	const std::int64_t now = clock_();
	if (s.cursor > 0 && s.cursor % static_cast<std::size_t>(options_.break_every) == 0) {
		const std::int64_t until = s.last_vote_ms + options_.break_ms;
		if (now < until) {
			return BreakActive{until - now};
		}
	}
	const std::string& qid = s.assigned[s.cursor];
	logEvent("served", s, qid, now);
	return Served{&items_[byQuestion_.at(qid)], s.cursor, s.assigned.size()};
}

validation::VoteRecord SurveyStore::submit(const std::string& session_id, const std::string& question_id,
                                           const std::string& answer) {
	const std::lock_guard lock(mutex_);
	const auto it = sessions_.find(session_id);
	if (it == sessions_.end()) {
		throw NotFound("unknown session " + session_id);
	}
	Session& s = it->second;
	const auto pos = std::find(s.assigned.begin(), s.assigned.end(), question_id);
	if (pos == s.assigned.end()) {
		throw Conflict("question " + question_id + " is not assigned to this session");
	}
	const auto index = static_cast<std::size_t>(pos - s.assigned.begin());
	if (index < s.cursor) {
		throw Conflict("question " + question_id + " was already answered");
	}
	if (index > s.cursor) {
		throw Conflict("question " + question_id + " is not the current item");
	}
	const std::int64_t now = clock_();
	if (s.cursor > 0 && s.cursor % static_cast<std::size_t>(options_.break_every) == 0 &&
	    now < s.last_vote_ms + options_.break_ms) {
		throw OnBreak("break in progress", s.last_vote_ms + options_.break_ms - now);
	}

	const SurveyItem& item = items_[byQuestion_.at(question_id)];
	const auto& q = item.question;
	auto vote = validation::make_vote(item.image_id, s.participant_id, question_id, canonicalAnswer(q, answer),
	                                  q.pixel_answer, q.expected_human_answer, now);
	if (stateDir_) {
		jsonl::append_locked(*stateDir_ / "votes.jsonl", {validation::to_json_line(vote)});
	}
	votes_.push_back(vote);
	++voteCounts_[item.image_id];
	++s.cursor;
	s.last_vote_ms = now;
	logEvent("vote", s, question_id, now);
	return vote;
}

Session SurveyStore::session(const std::string& session_id) const {
	const std::lock_guard lock(mutex_);
	const auto it = sessions_.find(session_id);
	if (it == sessions_.end()) {
		throw NotFound("unknown session " + session_id);
	}
	return it->second;
}

std::vector<validation::VoteRecord> SurveyStore::votes() const {
	const std::lock_guard lock(mutex_);
	return votes_;
}

std::map<std::string, int> SurveyStore::slot_counts() const {
	const std::lock_guard lock(mutex_);
	return slots_;
}

std::vector<std::string> SurveyStore::complete_images() const {
	const std::lock_guard lock(mutex_);
	std::vector<std::string> out;
	for (const auto& [image, n] : voteCounts_) {
		if (n >= options_.slots_per_image) {
			out.push_back(image);
		}
	}
	return out;
}

const SurveyItem* SurveyStore::item_by_image(const std::string& image_id) const {
	const auto it = byImage_.find(image_id);
	return it == byImage_.end() ? nullptr : &items_[it->second];
}

std::vector<SurveyItem> load_items(const std::filesystem::path& manifest_path, std::uint64_t seed,
                                   bool include_labeled) {
	const auto root = manifest_path.parent_path();
	std::vector<SurveyItem> items;
	for (const auto& r : manifest::read_manifest(manifest_path)) {
		const bool pending = r.label == manifest::RecordLabel::Pending;
		if (!pending && !(include_labeled && r.label != manifest::RecordLabel::Discarded)) {
			continue;
		}
		const auto info = pipeline::read_sidecar(root / r.sidecar);
		SurveyItem item;
		item.image_id = r.id;
		item.question = pipeline::question_for(info, questions::PromptMode::None, seed);
		item.unlabeled = root / info.image;
		item.labeled = root / info.labeled_image;
		items.push_back(std::move(item));
	}
	return items;
}

std::string onboarding_json() {
	ordered_json j;
	j["title"] = "Color perception survey";
	j["instructions"] = ordered_json::array(
	    {"Answer with your first impression of each image.",
	     "Use the toggle to show the A and B markers; the answer refers to the marked regions.",
	     "Color questions take a single color word."});
	j["display"] = ordered_json::array({"Sit in a relatively dark room.",
	                                    "Turn off night mode, blue light filters and automatic brightness.",
	                                    "Set screen brightness to a comfortable mid level."});
	j["breaks"] = "A pause of at least 30 seconds follows every 50 answers.";
	return j.dump(2);
}

} // namespace illusion::annotation
