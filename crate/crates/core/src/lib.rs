pub mod cli;
pub mod comb;
pub mod conic;
pub mod eigen;
pub mod io;
pub mod linalg;
pub mod maxcut;
pub mod pro;
pub mod uncertainty;
