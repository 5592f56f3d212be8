from weldfeas.cli import main

raise SystemExit(main())
