//! The standard solve window: a snowflake chain closed off by artificial
//! sides and a top, with Dirichlet data zero on the graph and `y` on the
//! artificial boundary.

use crate::chain::BoundaryChain;
use crate::geom::Point;
use crate::mesh::{BoundaryMarker, MarkedPolygon, TriMesh};

/// Close a left-to-right boundary chain into the polygon bounded below by
/// the chain and above by the horizontal line `y = top`, with side walls at
/// the chain's endpoints.
///
/// The chain edges are marked `Graph`; the walls and lid are artificial.
pub fn window_polygon(chain: &BoundaryChain, top: f64) -> MarkedPolygon {
    let first = chain.vertices[0];
    let last = *chain.vertices.last().unwrap();
    let mut ring = chain.vertices.clone();
    let mut markers = vec![BoundaryMarker::Graph; chain.num_segments()];
    ring.push(Point::new(last.x, top));
    markers.push(BoundaryMarker::ArtificialSide);
    ring.push(Point::new(first.x, top));
    markers.push(BoundaryMarker::ArtificialTop);
    markers.push(BoundaryMarker::ArtificialSide);
    MarkedPolygon::single(ring, markers)
}

/// Dirichlet data for the window problem: zero on graph vertices, `y` on
/// artificial ones. Returns `(vertex, value)` pairs for all boundary
/// vertices; graph membership wins where a vertex carries both markers
/// (the wall feet).
pub fn window_boundary_data(mesh: &TriMesh) -> Vec<(usize, f64)> {
    let graph: std::collections::HashSet<usize> =
        mesh.marked_vertices(BoundaryMarker::Graph).into_iter().collect();
    let mut data: Vec<(usize, f64)> = Vec::new();
    for v in mesh.boundary_vertices() {
        if graph.contains(&v) {
            data.push((v, 0.0));
        } else {
            data.push((v, mesh.vertices[v].y));
        }
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::BoundaryChain;

    #[test]
    fn window_closes_the_chain() {
        let chain = BoundaryChain::unit_face();
        let poly = window_polygon(&chain, 1.0);
        assert_eq!(poly.rings[0].len(), 4);
        assert!(poly.area() > 0.99);
        let n_graph = poly.markers[0]
            .iter()
            .filter(|m| **m == BoundaryMarker::Graph)
            .count();
        assert_eq!(n_graph, 1);
    }
}
