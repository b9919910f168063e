#include "illusion/annotation.hpp"

#include "illusion/errors.hpp"
#include "illusion/jsonl.hpp"

#include <httplib.h>
#include <json.hpp>

namespace illusion::annotation {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void sendJson(httplib::Response& res, int status, const ordered_json& body) {
	res.status = status;
	res.set_content(body.dump(), "application/json");
}

void sendError(httplib::Response& res, int status, const std::string& message) {
	sendJson(res, status, ordered_json{{"error", message}});
}

ordered_json sessionJson(const Session& s) {
	return ordered_json{{"session_id", s.session_id},
	                    {"participant_id", s.participant_id},
	                    {"answered", s.answered()},
	                    {"total", s.assigned.size()},
	                    {"done", s.done()}};
}

ordered_json itemJson(const Served& served) {
	const auto& q = served.item->question;
	ordered_json options = ordered_json::array();
	for (std::size_t i = 0; i < q.options.size(); ++i) {
		options.push_back(
		    {{"letter", std::string(1, questions::option_letter(i))}, {"key", q.options[i].key}, {"text", q.options[i].text}});
	}
	const std::string base = "/assets/" + served.item->image_id;
	return ordered_json{{"done", false},
	                    {"question_id", q.id},
	                    {"image_id", served.item->image_id},
	                    {"kind", questions::to_string(q.kind)},
	                    {"text", q.text()},
	                    {"answer_format", q.kind == questions::QuestionKind::Comparison ? "option" : "color"},
	                    {"options", options},
	                    {"assets", {{"unlabeled", base + "/unlabeled"}, {"labeled", base + "/labeled"}}},
	                    {"progress", {{"answered", served.position}, {"total", served.total}}}};
}

void sendBreak(httplib::Response& res, std::int64_t retry_after_ms) {
	// Retry-After has whole seconds; round up so clients never come back early.
	res.set_header("Retry-After", std::to_string((retry_after_ms + 999) / 1000));
	sendJson(res, 503, ordered_json{{"error", "break"}, {"retry_after_ms", retry_after_ms}});
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
	try {
		body();
	} catch (const NotFound& e) {
		sendError(res, 404, e.what());
	} catch (const Conflict& e) {
		sendError(res, 409, e.what());
	} catch (const NoCapacity& e) {
		sendError(res, 409, e.what());
	} catch (const OnBreak& e) {
		sendBreak(res, e.retry_after_ms);
	} catch (const ValidationError& e) {
		sendError(res, 400, e.what());
	} catch (const json::exception& e) {
		sendError(res, 400, std::string("bad request body: ") + e.what());
	} catch (const std::exception& e) {
		sendError(res, 500, e.what());
	}
}

} // namespace

struct HttpServer::Impl {
	SurveyStore& store;
	httplib::Server server;

	explicit Impl(SurveyStore& s) : store(s) {}
};

HttpServer::HttpServer(SurveyStore& store) : impl_(std::make_unique<Impl>(store)) {
	auto& svr = impl_->server;
	SurveyStore& st = store;

	svr.Post("/sessions", [&st](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const auto body = json::parse(req.body);
			bool created = false;
			const Session s = st.open_session(body.at("participant_id").get<std::string>(), &created);
			sendJson(res, created ? 201 : 200, sessionJson(s));
		});
	});

	svr.Get(R"(/sessions/([^/]+))", [&st](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] { sendJson(res, 200, sessionJson(st.session(req.matches[1]))); });
	});

	svr.Get(R"(/sessions/([^/]+)/next)", [&st](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const NextResult r = st.next(req.matches[1]);
			if (const auto* served = std::get_if<Served>(&r)) {
				sendJson(res, 200, itemJson(*served));
			} else if (const auto* pause = std::get_if<BreakActive>(&r)) {
				sendBreak(res, pause->retry_after_ms);
			} else {
				sendJson(res, 200, ordered_json{{"done", true}});
			}
		});
	});

	svr.Post(R"(/sessions/([^/]+)/responses)", [&st](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const auto body = json::parse(req.body);
			const auto vote = st.submit(req.matches[1], body.at("question_id").get<std::string>(),
			                            body.at("answer").get<std::string>());
			res.status = 201;
			res.set_content(validation::to_json_line(vote), "application/json");
		});
	});

	svr.Get(R"(/assets/([^/]+)/(labeled|unlabeled))", [&st](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const SurveyItem* item = st.item_by_image(req.matches[1]);
			if (!item) {
				throw NotFound("unknown image " + std::string(req.matches[1]));
			}
			const auto& path = req.matches[2] == "labeled" ? item->labeled : item->unlabeled;
			res.set_content(jsonl::read_file(path), "image/png");
		});
	});

	svr.Get("/onboarding", [](const httplib::Request&, httplib::Response& res) {
		res.set_content(onboarding_json(), "application/json");
	});

	svr.Get("/votes", [&st](const httplib::Request&, httplib::Response& res) {
		std::string out;
		for (const auto& v : st.votes()) {
			out += validation::to_json_line(v);
			out += '\n';
		}
		res.set_content(out, "application/x-ndjson");
	});
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
	if (port == 0) {
		const int bound = impl_->server.bind_to_any_port(host);
		if (bound < 0) {
			throw IoError("cannot bind " + host);
		}
		return bound;
	}
	if (!impl_->server.bind_to_port(host, port)) {
		throw IoError("cannot bind " + host + ":" + std::to_string(port));
	}
	return port;
}

void HttpServer::listen() {
	impl_->server.listen_after_bind();
}

void HttpServer::stop() {
	impl_->server.stop();
}

} // namespace illusion::annotation
