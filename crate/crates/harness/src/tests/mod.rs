mod cli;
mod io;
