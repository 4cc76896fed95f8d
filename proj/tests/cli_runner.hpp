// Runs the command-line binary in a scratch directory and captures its output.
#ifndef PANELGUARD_TESTS_CLI_RUNNER_HPP
#define PANELGUARD_TESTS_CLI_RUNNER_HPP

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace cli {

struct Result {
    int status = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Sandbox {
public:
    Sandbox() {
        std::random_device rd;
        dir_ = std::filesystem::temp_directory_path() / ("panelguard-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(dir_);
    }
    ~Sandbox() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    Sandbox(const Sandbox&) = delete;
    Sandbox& operator=(const Sandbox&) = delete;

    std::filesystem::path path(const std::string& name) const { return dir_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        std::ofstream(path(name), std::ios::binary) << content;
        return path(name);
    }

    /// Runs `<binary> <args>` with the sandbox as working directory.
    Result run(const std::string& args) const {
        const std::string cmd = "cd '" + dir_.string() + "' && '" PANELGUARD_CLI "' " + args + " > '" +
                                path(".stdout").string() + "' 2> '" + path(".stderr").string() + "'";
        const int raw = std::system(cmd.c_str());
        Result r;
        r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        r.out = slurp(path(".stdout"));
        r.err = slurp(path(".stderr"));
        return r;
    }

private:
    std::filesystem::path dir_;
};

}  // namespace cli

#endif
