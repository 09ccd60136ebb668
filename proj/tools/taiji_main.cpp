#include <cstdio>

int main() {
    std::puts("taiji: subcommands not wired yet");
    return 1;
}
