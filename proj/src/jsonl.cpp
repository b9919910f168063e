#include "illusion/jsonl.hpp"

#include "illusion/errors.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace illusion::jsonl {

namespace {

std::string systemError(const std::string& what, const std::filesystem::path& path) {
	return what + " " + path.string() + ": " + std::strerror(errno);
}

class Fd {
public:
	explicit Fd(int fd) : fd_(fd) {}
	Fd(const Fd&) = delete;
	Fd& operator=(const Fd&) = delete;
	~Fd() {
		if (fd_ >= 0) {
			::close(fd_);
		}
	}
	[[nodiscard]] int get() const noexcept { return fd_; }

private:
	int fd_;
};

void writeAll(int fd, std::string_view data, const std::filesystem::path& path) {
	while (!data.empty()) {
		const ssize_t n = ::write(fd, data.data(), data.size());
		if (n < 0) {
			if (errno == EINTR) {
				continue;
			}
			throw IoError(systemError("cannot write", path));
		}
		data.remove_prefix(static_cast<std::size_t>(n));
	}
}

} // namespace

std::string read_file(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw IoError("cannot open " + path.string());
	}
	std::ostringstream buffer;
	buffer << in.rdbuf();
	return buffer.str();
}

void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& visit) {
	std::ifstream in(path);
	if (!in) {
		throw IoError("cannot open " + path.string());
	}
	std::string line;
	std::size_t number = 0;
	while (std::getline(in, line)) {
		++number;
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (line.find_first_not_of(" \t") == std::string::npos) {
			continue;
		}
		visit(line, number);
	}
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
	static std::atomic<unsigned> counter{0};
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	std::filesystem::path temp = path;
	temp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
	{
		Fd fd(::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
		if (fd.get() < 0) {
			throw IoError(systemError("cannot create", temp));
		}
		writeAll(fd.get(), content, temp);
		if (::fsync(fd.get()) != 0) {
			throw IoError(systemError("cannot sync", temp));
		}
	}
	std::error_code ec;
	std::filesystem::rename(temp, path, ec);
	if (ec) {
		std::filesystem::remove(temp);
		throw IoError("cannot replace " + path.string() + ": " + ec.message());
	}
}

void append_locked(const std::filesystem::path& path, const std::vector<std::string>& lines) {
	if (lines.empty()) {
		return;
	}
	std::string block;
	for (const auto& line : lines) {
		block += line;
		block += '\n';
	}
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	Fd fd(::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
	if (fd.get() < 0) {
		throw IoError(systemError("cannot open for append", path));
	}
	if (::flock(fd.get(), LOCK_EX) != 0) {
		throw IoError(systemError("cannot lock", path));
	}
	writeAll(fd.get(), block, path);
	::flock(fd.get(), LOCK_UN);
}

std::string where(const std::filesystem::path& path, std::size_t line, std::string_view message) {
	return path.string() + ":" + std::to_string(line) + ": " + std::string(message);
}

} // namespace illusion::jsonl
