#pragma once
// Shared doctest entry point. Each test binary receives the repository root
// as its first plain argument (used to locate committed reference dumps).
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <string>
#include <vector>

inline std::string& source_dir() {
    static std::string s = ".";
    return s;
}

int main(int argc, char** argv) {
    std::vector<char*> args = {argv[0]};
    for (int i = 1; i < argc; ++i) {
        if (argv[i][0] != '-')
            source_dir() = argv[i];
        else
            args.push_back(argv[i]);
    }
    doctest::Context ctx(static_cast<int>(args.size()), args.data());
    return ctx.run();
}
