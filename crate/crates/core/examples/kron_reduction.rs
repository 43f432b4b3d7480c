//! Laplacian spectra and Kron reduction on small graphs.

use hybridstab::network::{kron_reduce, sym_eigenvalues};
use nalgebra::DMatrix;

fn laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, w) in edges {
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

fn main() -> hybridstab::Result<()> {
    let path = laplacian(3, &[(0, 1, 2.0), (1, 2, 2.0)]);
    println!("path spectrum {:?}", sym_eigenvalues(&path));
    let red = kron_reduce(&path, &[0, 2])?;
    println!("series equivalent: b = {}", -red.reduced[(0, 1)]);
    println!("load map {}", red.load_map);

    // star with the centre (node 0) eliminated
    let star = laplacian(4, &[(0, 1, 3.0), (0, 2, 3.0), (0, 3, 3.0)]);
    let red = kron_reduce(&star, &[1, 2, 3])?;
    println!("star -> triangle {}", red.reduced);

    // boundary angles from the full and the reduced system agree
    let l = laplacian(5, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.5), (3, 4, 0.5), (4, 0, 1.0), (1, 3, 0.7)]);
    let keep = [0, 2, 4];
    let red = kron_reduce(&l, &keep)?;
    let p = nalgebra::DVector::from_vec(vec![1.0, 0.4, -0.6, 0.2, -1.0]);
    // ground node 0 to fix the angle reference
    let full = l.view((1, 1), (4, 4)).into_owned().lu().solve(&p.rows(1, 4).into_owned()).unwrap();
    let p_red = &red.load_map * &p;
    let reduced = red.reduced.view((1, 1), (2, 2)).into_owned().lu().solve(&p_red.rows(1, 2).into_owned()).unwrap();
    println!("full angles at 2, 4: {:.12} {:.12}", full[1], full[3]);
    println!("reduced angles:      {:.12} {:.12}", reduced[0], reduced[1]);
    Ok(())
}
