from atomsync.cli import main

main()
