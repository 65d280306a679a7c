from rbvm.cli import main

main()
