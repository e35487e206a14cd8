// make_fixture_db <script.sql> <out.db>: (re)creates a database from a script.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "nrep/sqlite_db.hpp"
#include "nrep/text.hpp"

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: make_fixture_db <script.sql> <out.db>\n";
        return 2;
    }
    try {
        std::filesystem::remove(argv[2]);
        nrep::Database db(argv[2], nrep::Database::Mode::ReadWriteCreate);
        db.exec(nrep::read_file(argv[1]));
    } catch (const std::exception& e) {
        std::cerr << "make_fixture_db: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
