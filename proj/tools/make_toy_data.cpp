// Regenerates the bundled toy face sets under data/toy.
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "crsr/error.hpp"
#include "crsr/toy_faces.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Render the synthetic toy face sets"};
  std::string out_dir = "data/toy";
  app.add_option("--output", out_dir, "Destination root");
  CLI11_PARSE(app, argc, argv);

  namespace fs = std::filesystem;
  try {
    // Same identities, different poses and lighting for the held-out split.
    const crsr::ToyFaceSet train = crsr::make_toy_faces({4, 8, 1, 1});
    const crsr::ToyFaceSet heldout = crsr::make_toy_faces({4, 4, 1, 2});
    crsr::write_toy_faces(train, fs::path(out_dir) / "hr");
    crsr::write_toy_faces(heldout, fs::path(out_dir) / "heldout");
  } catch (const crsr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote toy faces to " << out_dir << '\n';
  return 0;
}
