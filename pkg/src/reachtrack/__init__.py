"""Hamilton-Jacobi reachability and reach-track pursuit toolkit."""
